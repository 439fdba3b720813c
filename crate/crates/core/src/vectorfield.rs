//! The planar field whose integral curves are herringbone spines, in the
//! shifted coordinates where the node of a simple root u₀ sits at (u₀, 0).
//!
//! LEFT is the field written directly for the pair. RIGHT is obtained from
//! the LEFT field of the mirrored pair g(t) = f(−t) through the reflection
//! x₁ ↦ −x₁, so everything below is computed for a "work" pair and mapped.

use serde::{Deserialize, Serialize};

use crate::boundary::{derivative_difference_roots, BoundaryPair};
use crate::error::{Error, Result};
use crate::foliation::{d_fields, ConcavityField};
use crate::geometry::Point;
use crate::herringbone::Orientation;
use crate::numeric::bisect;

pub const RTOL: f64 = 1e-10;
pub const ATOL: f64 = 1e-12;
/// Saddle launch offset and node capture radius, in units of ε.
pub const LAUNCH_OFFSET: f64 = 1e-6;
pub const NODE_RADIUS: f64 = 1e-7;
pub const EVENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldState {
    pub pair: BoundaryPair,
    pub epsilon: f64,
    pub orientation: Orientation,
    work: BoundaryPair,
}

pub type Mat2 = [[f64; 2]; 2];

impl VectorFieldState {
    pub fn new(pair: BoundaryPair, epsilon: f64, orientation: Orientation) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let work = match orientation {
            Orientation::Left => pair.clone(),
            Orientation::Right => pair.mirrored(),
        };
        Ok(Self { pair, epsilon, orientation, work })
    }

    fn m(&self) -> f64 {
        self.orientation.sigma()
    }

    fn to_work(&self, p: Point) -> Point {
        Point::new(self.m() * p.x1, p.x2)
    }

    /// Field coordinate x₁ to strip/spine coordinate u.
    pub fn to_strip_u(&self, x1: f64) -> f64 {
        x1 + self.m() * self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.pair.clone(), epsilon, self.orientation)
    }

    /// D± of the orientation at a field point (D^R via the mirrored pair).
    pub fn concavity(&self, p: Point) -> Result<ConcavityField> {
        d_fields(&self.work, self.to_work(p))
    }
}

fn work_field(g: &BoundaryPair, e: f64, p: Point) -> (f64, f64) {
    let (a, b) = (p.x1 + p.x2, p.x1 - p.x2);
    let (dp, dm) = (g.fp(a, 1), g.fm(b, 1));
    let (sp, sm) = (g.fp(a, 2), g.fm(b, 2));
    let x2 = p.x2;
    let v1 = e * (dp - dm) - x2 * (e - x2) * sm - x2 * (e + x2) * sp;
    let v2 = x2 * (dm - dp) - x2 * (e - x2) * sm + x2 * (e + x2) * sp;
    (v1, v2)
}

fn work_jacobian(g: &BoundaryPair, e: f64, p: Point) -> Mat2 {
    let (a, b) = (p.x1 + p.x2, p.x1 - p.x2);
    let (dp, dm) = (g.fp(a, 1), g.fm(b, 1));
    let (sp, sm) = (g.fp(a, 2), g.fm(b, 2));
    let (tp, tm) = (g.fp(a, 3), g.fm(b, 3));
    let x2 = p.x2;
    let j11 = e * (sp - sm) - x2 * (e - x2) * tm - x2 * (e + x2) * tp;
    let j12 = 2.0 * x2 * (sm - sp) + x2 * (e - x2) * tm - x2 * (e + x2) * tp;
    let j21 = x2 * (sm - sp) - x2 * (e - x2) * tm + x2 * (e + x2) * tp;
    let j22 = (dm - dp) - (e - x2) * (sm - x2 * tm) + (e + x2) * (sp + x2 * tp);
    [[j11, j12], [j21, j22]]
}

pub fn field(state: &VectorFieldState, p: Point) -> (f64, f64) {
    let (v1, v2) = work_field(&state.work, state.epsilon, state.to_work(p));
    (state.m() * v1, v2)
}

pub fn jacobian(state: &VectorFieldState, p: Point) -> Mat2 {
    let j = work_jacobian(&state.work, state.epsilon, state.to_work(p));
    let m = state.m();
    [[j[0][0], m * j[0][1]], [m * j[1][0], j[1][1]]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StationaryKind {
    Node,
    Saddle,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SaddleSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub location: Point,
    pub kind: StationaryKind,
    pub side: Option<SaddleSide>,
    /// Strip abscissa u₀ of the node this point belongs to.
    pub node_u0: f64,
    pub jacobian: Mat2,
    /// Ascending; NaN when complex.
    pub eigenvalues: [f64; 2],
    pub eigenvectors: [(f64, f64); 2],
    pub varkappa_plus: f64,
    pub varkappa_minus: f64,
    pub kappa: Option<f64>,
    pub s: Option<f64>,
}

/// Real eigen-decomposition of a 2×2 matrix; unit eigenvectors with
/// nonnegative first nonzero component.
pub fn eigen2(j: &Mat2) -> ([f64; 2], [(f64, f64); 2]) {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return ([f64::NAN; 2], [(f64::NAN, f64::NAN); 2]);
    }
    let r = disc.sqrt();
    let lams = [tr / 2.0 - r, tr / 2.0 + r];
    let scale = j.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut vecs = [(1.0, 0.0), (0.0, 1.0)];
    if j[0][1].abs() <= 1e-14 * scale && j[1][0].abs() <= 1e-14 * scale {
        // Diagonal: axis vectors, ordered with the eigenvalues.
        if j[0][0] > j[1][1] {
            vecs = [(0.0, 1.0), (1.0, 0.0)];
        }
        return (lams, vecs);
    }
    for (k, &l) in lams.iter().enumerate() {
        let a = (j[0][1], l - j[0][0]);
        let b = (l - j[1][1], j[1][0]);
        let v = if a.0.hypot(a.1) >= b.0.hypot(b.1) { a } else { b };
        let n = v.0.hypot(v.1);
        let mut v = (v.0 / n, v.1 / n);
        if v.0 < 0.0 || (v.0 == 0.0 && v.1 < 0.0) {
            v = (-v.0, -v.1);
        }
        vecs[k] = v;
    }
    (lams, vecs)
}

fn det2(j: &Mat2) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// f₊′(u+ε) − f₋′(u−ε) − 2εf₊″(u+ε): the upper saddle equation.
fn upper_saddle_eq(g: &BoundaryPair, e: f64, u: f64) -> f64 {
    g.fp(u + e, 1) - g.fm(u - e, 1) - 2.0 * e * g.fp(u + e, 2)
}

/// f₋′(u+ε) − f₊′(u−ε) − 2εf₋″(u+ε): the lower saddle equation.
fn lower_saddle_eq(g: &BoundaryPair, e: f64, u: f64) -> f64 {
    g.fm(u + e, 1) - g.fp(u - e, 1) - 2.0 * e * g.fm(u + e, 2)
}

fn bracket_root<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Option<f64> {
    let mut x0 = a;
    let mut y0 = f(a);
    for i in 1..=n {
        let x1 = a + (b - a) * i as f64 / n as f64;
        let y1 = f(x1);
        if y0 == 0.0 && i > 1 {
            return Some(x0);
        }
        if y1 == 0.0 && i < n {
            return Some(x1);
        }
        if (y0 < 0.0 && y1 > 0.0) || (y0 > 0.0 && y1 < 0.0) {
            return Some(bisect(&f, x0, x1, 1e-15 * (1.0 + x1.abs())));
        }
        x0 = x1;
        y0 = y1;
    }
    None
}

fn newton2(g: &BoundaryPair, e: f64, mut p: Point) -> Option<Point> {
    for _ in 0..60 {
        let (v1, v2) = work_field(g, e, p);
        let j = work_jacobian(g, e, p);
        let d = det2(&j);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let dx1 = (j[1][1] * v1 - j[0][1] * v2) / d;
        let dx2 = (j[0][0] * v2 - j[1][0] * v1) / d;
        p = Point::new(p.x1 - dx1, p.x2 - dx2);
        if !(p.x1.is_finite() && p.x2.is_finite()) {
            return None;
        }
        if dx1.hypot(dx2) <= 1e-14 * (1.0 + p.x1.abs() + p.x2.abs()) {
            let (v1, v2) = work_field(g, e, p);
            let sc = 1.0 + j.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
            return (v1.hypot(v2) <= 1e-9 * sc).then_some(p);
        }
    }
    None
}

/// Nodes of simple roots in `window` (strip coordinates) with their two
/// boundary saddles and, when Newton finds it, the fourth stationary point.
pub fn find_stationary_points(state: &VectorFieldState, window: (f64, f64)) -> Result<Vec<StationaryPoint>> {
    let g = &state.work;
    let e = state.epsilon;
    let m = state.m();
    let wwin = if m > 0.0 { window } else { (-window.1, -window.0) };
    let roots = derivative_difference_roots(g, wwin)?;
    let mut out = Vec::new();
    for root in roots {
        if !root.simple {
            return Err(Error::UnsupportedDegenerate(format!(
                "multiple root of f₊′ − f₋′ at u = {}",
                m * root.u0
            )));
        }
        let u0 = root.u0;
        let d2 = g.fp(u0, 2) - g.fm(u0, 2);
        let kp = 2.0 * g.fp(u0, 3) / d2;
        let km = -2.0 * g.fm(u0, 3) / d2;
        // ϰ± reported for the pair as given.
        let (rp, rm) = (m * kp, m * km);
        let node_u = m * u0;
        let mk = |wp: Point, kind, side, kappa, s| {
            let j = work_jacobian(g, e, wp);
            let (lams, vecs) = eigen2(&j);
            let jm = [[j[0][0], m * j[0][1]], [m * j[1][0], j[1][1]]];
            StationaryPoint {
                location: Point::new(m * wp.x1, wp.x2),
                kind,
                side,
                node_u0: node_u,
                jacobian: jm,
                eigenvalues: lams,
                eigenvectors: [(m * vecs[0].0, vecs[0].1), (m * vecs[1].0, vecs[1].1)],
                varkappa_plus: rp,
                varkappa_minus: rm,
                kappa,
                s,
            }
        };
        out.push(mk(Point::new(u0, 0.0), StationaryKind::Node, None, None, None));

        let up = bracket_root(|u| upper_saddle_eq(g, e, u), u0, u0 + 2.0 * e, 256).ok_or_else(|| {
            Error::SaddleNotFound {
                node: node_u,
                reason: format!("no root of the upper saddle equation within 2ε = {} of the node", 2.0 * e),
            }
        })?;
        let lo = bracket_root(|u| lower_saddle_eq(g, e, u), u0, u0 + 2.0 * e, 256).ok_or_else(|| {
            Error::SaddleNotFound {
                node: node_u,
                reason: format!("no root of the lower saddle equation within 2ε = {} of the node", 2.0 * e),
            }
        })?;
        for (u, x2, side) in [(up, e, SaddleSide::Upper), (lo, -e, SaddleSide::Lower)] {
            let kappa = match side {
                SaddleSide::Upper => {
                    2.0 * g.fp(u + e, 3) / (g.fp(u + e, 2) - g.fm(u - e, 2) - 2.0 * e * g.fp(u + e, 3))
                }
                SaddleSide::Lower => {
                    2.0 * g.fm(u + e, 3) / (g.fm(u + e, 2) - g.fp(u - e, 2) - 2.0 * e * g.fm(u + e, 3))
                }
            };
            let s = match side {
                SaddleSide::Upper => 1.0 + e * kp,
                SaddleSide::Lower => 1.0 + e * km,
            };
            let wp = Point::new(u, x2);
            let kind = if det2(&work_jacobian(g, e, wp)) < 0.0 {
                StationaryKind::Saddle
            } else {
                StationaryKind::Other
            };
            out.push(mk(wp, kind, Some(side), Some(kappa), Some(s)));
        }

        if kp != 0.0 && kp.is_finite() {
            if let Some(p4) = newton2(g, e, Point::new(u0, -1.0 / kp)) {
                let known = out.iter().any(|q| {
                    let w = Point::new(m * q.location.x1, q.location.x2);
                    w.dist(p4) <= 1e-8 * (1.0 + e)
                });
                if !known && p4.x1 >= wwin.0 && p4.x1 <= wwin.1 {
                    out.push(mk(p4, StationaryKind::Other, None, None, None));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    HitBoundary,
    HitNode,
    Escaped,
    StepLimit,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::HitBoundary => "HIT_BOUNDARY",
            Termination::HitNode => "HIT_NODE",
            Termination::Escaped => "ESCAPED",
            Termination::StepLimit => "STEP_LIMIT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralCurve {
    pub samples: Vec<Point>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopConditions {
    /// Leaving this x₁ interval ends the curve as ESCAPED.
    pub x1_range: (f64, f64),
    /// Stop on |x₂| = ε.
    pub boundary: bool,
    /// Stop within `node_radius` of this point.
    pub node: Option<Point>,
    pub node_radius: f64,
    pub max_length: f64,
    pub max_steps: usize,
}

impl StopConditions {
    pub fn new(x1_range: (f64, f64)) -> Self {
        Self {
            x1_range,
            boundary: true,
            node: None,
            node_radius: 0.0,
            max_length: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

// Dormand–Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step of an autonomous planar system; returns the
/// fifth-order point and the embedded error estimate.
pub fn dp_step<F: Fn(Point) -> (f64, f64)>(f: &F, x: Point, h: f64) -> (Point, (f64, f64)) {
    let _ = C;
    let mut k = [(0.0, 0.0); 7];
    for i in 0..7 {
        let mut y = x;
        for j in 0..i {
            y.x1 += h * A[i][j] * k[j].0;
            y.x2 += h * A[i][j] * k[j].1;
        }
        k[i] = f(y);
    }
    let mut y5 = x;
    let mut err = (0.0, 0.0);
    for i in 0..7 {
        y5.x1 += h * B5[i] * k[i].0;
        y5.x2 += h * B5[i] * k[i].1;
        err.0 += h * (B5[i] - B4[i]) * k[i].0;
        err.1 += h * (B5[i] - B4[i]) * k[i].1;
    }
    (y5, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Boundary,
    Node,
    Escape,
}

/// Integrate the arclength-normalized field from `start`, with the time sign
/// chosen so the initial velocity points along `direction`.
pub fn integrate(
    state: &VectorFieldState,
    start: Point,
    direction: (f64, f64),
    stop: &StopConditions,
) -> Result<IntegralCurve> {
    let e = state.epsilon;
    let v0 = field(state, start);
    let speed0 = v0.0.hypot(v0.1);
    let jscale = jacobian(state, start).iter().flatten().fold(1.0_f64, |a, v| a.max(v.abs()));
    if speed0 <= 1e-12 * jscale * e {
        return Err(Error::StationaryStart);
    }
    let dot = v0.0 * direction.0 + v0.1 * direction.1;
    let sgn = if dot >= 0.0 { 1.0 } else { -1.0 };
    let f = |p: Point| {
        let (a, b) = field(state, p);
        let n = a.hypot(b);
        if n == 0.0 {
            (0.0, 0.0)
        } else {
            (sgn * a / n, sgn * b / n)
        }
    };
    let hmax = e / 200.0;
    let hmin = 1e-14 * e;
    let tol_ev = EVENT_TOL * e;
    let event_of = |p: Point| -> Option<Event> {
        if let Some(n) = stop.node {
            if p.dist(n) <= stop.node_radius {
                return Some(Event::Node);
            }
        }
        if stop.boundary && p.x2.abs() > e {
            return Some(Event::Boundary);
        }
        if p.x1 < stop.x1_range.0 || p.x1 > stop.x1_range.1 {
            return Some(Event::Escape);
        }
        None
    };
    if event_of(start) == Some(Event::Escape) {
        return Err(Error::invalid("integration start lies outside the x1 window"));
    }

    let mut x = start;
    let mut samples = vec![x];
    let mut h = hmax.min(1e-3 * e);
    let mut length = 0.0;
    let mut steps = 0usize;
    let mut crawling = 0usize;
    loop {
        if steps >= stop.max_steps || length >= stop.max_length {
            return Ok(IntegralCurve { samples, termination: Termination::StepLimit });
        }
        let (xn, err) = dp_step(&f, x, h);
        let sc1 = ATOL + RTOL * x.x1.abs().max(xn.x1.abs());
        let sc2 = ATOL + RTOL * x.x2.abs().max(xn.x2.abs());
        let en = (err.0 / sc1).abs().max((err.1 / sc2).abs());
        if !en.is_finite() || en > 1.0 {
            h *= if en.is_finite() { (0.9 * en.powf(-0.2)).max(0.2) } else { 0.1 };
            if h < hmin {
                return Err(Error::IntegrationFailure(format!(
                    "step size underflow at ({}, {})",
                    x.x1, x.x2
                )));
            }
            continue;
        }
        steps += 1;
        if let Some(ev) = event_of(xn) {
            // Localize the event by bisection on the step length.
            let (mut lo, mut hi) = (0.0, h);
            let mut hit = xn;
            let mut hit_ev = ev;
            for _ in 0..200 {
                let resid = match hit_ev {
                    Event::Boundary => hit.x2.abs() - e,
                    Event::Node => stop.node_radius - hit.dist(stop.node.unwrap()),
                    Event::Escape => {
                        (stop.x1_range.0 - hit.x1).max(hit.x1 - stop.x1_range.1)
                    }
                };
                if resid <= tol_ev || hi - lo <= 1e-3 * hmin {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (pm, _) = dp_step(&f, x, mid);
                match event_of(pm) {
                    Some(ev2) => {
                        hi = mid;
                        hit = pm;
                        hit_ev = ev2;
                    }
                    None => lo = mid,
                }
            }
            samples.push(hit);
            let termination = match hit_ev {
                Event::Boundary => Termination::HitBoundary,
                Event::Node => Termination::HitNode,
                Event::Escape => Termination::Escaped,
            };
            return Ok(IntegralCurve { samples, termination });
        }
        // Creeping into a stationary point that is not a stop target.
        crawling = if h <= 1e-10 * e { crawling + 1 } else { 0 };
        if crawling > 200 {
            samples.push(xn);
            return Ok(IntegralCurve { samples, termination: Termination::StepLimit });
        }
        length += x.dist(xn);
        x = xn;
        samples.push(x);
        let grow = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * grow).min(hmax);
    }
}

/// Which saddle eigenvector to launch along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Launch {
    /// The manifold that connects to the node.
    Connecting,
    /// The other eigenvector; leaves without reaching the node.
    Other,
}

fn check_concavity_along(state: &VectorFieldState, curve: &IntegralCurve) -> Option<(f64, Point)> {
    let e = state.epsilon;
    let mut worst: Option<(f64, Point)> = None;
    for &p in &curve.samples {
        if p.x2.abs() < 1e-6 * e {
            continue;
        }
        let Ok(d) = state.concavity(p) else { continue };
        let w = state.to_work(p);
        let g = &state.work;
        let scale = 1.0_f64
            .max(g.fp(w.x1 + w.x2, 2).abs())
            .max(g.fm(w.x1 - w.x2, 2).abs())
            .max(d.d_plus.abs().min(d.d_minus.abs()));
        let v = d.d_plus.min(d.d_minus);
        if v < -1e-9 * scale && worst.map_or(true, |(wv, _)| v < wv) {
            worst = Some((v, p));
        }
    }
    worst
}

/// Shoot from a boundary saddle to its node along the saddle eigenvector
/// that points into the strip.
pub fn shoot_separatrix(
    state: &VectorFieldState,
    saddle: &StationaryPoint,
    node: &StationaryPoint,
    launch: Launch,
) -> Result<IntegralCurve> {
    if saddle.kind != StationaryKind::Saddle || node.kind != StationaryKind::Node {
        return Err(Error::invalid("shooting needs a saddle and a node"));
    }
    if saddle.eigenvalues.iter().any(|l| l.is_nan()) {
        return Err(Error::invalid("saddle eigen-data missing"));
    }
    let e = state.epsilon;
    let c = node.jacobian[0][0];
    // A source node is reached backward along the stable direction; a sink
    // forward along the unstable one.
    let connecting = if c > 0.0 { 0 } else { 1 };
    let k = match launch {
        Launch::Connecting => connecting,
        Launch::Other => 1 - connecting,
    };
    let mut v = saddle.eigenvectors[k];
    let inward = -saddle.location.x2.signum();
    if v.1 * inward < 0.0 {
        v = (-v.0, -v.1);
    }
    let eta = LAUNCH_OFFSET * e;
    let start = Point::new(saddle.location.x1 + eta * v.0, saddle.location.x2 + eta * v.1);
    let x0 = node.location.x1;
    let mut stop = StopConditions::new((x0 - 6.0 * e, x0 + 6.0 * e));
    stop.node = Some(node.location);
    stop.node_radius = NODE_RADIUS * e;
    stop.max_length = 40.0 * e;
    let curve = integrate(state, start, v, &stop)?;
    if curve.termination != Termination::HitNode {
        return Err(Error::ShootFailure {
            termination: Termination::Escaped.name().into(),
            detail: format!("curve ended with {} before reaching the node", curve.termination.name()),
        });
    }
    if let Some((v, p)) = check_concavity_along(state, &curve) {
        return Err(Error::ShootFailure {
            termination: Termination::Escaped.name().into(),
            detail: format!("left the D ≥ 0 region: min D = {v} at ({}, {})", p.x1, p.x2),
        });
    }
    Ok(curve)
}

/// Slope dx₂/dx₁ with which a curve arrives at (or leaves) `node`.
pub fn arrival_slope(curve: &IntegralCurve, node: Point) -> f64 {
    let p = *curve.samples.last().unwrap();
    (p.x2 - node.x2) / (p.x1 - node.x1)
}

/// Continue a curve that stopped near `node` on the other side of it, with
/// the same tangent, until it reaches the boundary.
pub fn continue_through_node(state: &VectorFieldState, curve: &IntegralCurve, node: Point) -> Result<IntegralCurve> {
    let p = *curve.samples.last().unwrap();
    let d = (node.x1 - p.x1, node.x2 - p.x2);
    let n = d.0.hypot(d.1);
    if n == 0.0 {
        return Err(Error::invalid("curve ends exactly on the node"));
    }
    continue_from_node(state, node, (d.0 / n, d.1 / n))
}

/// Leave the node along the unit direction `t` and run to the boundary.
pub fn continue_from_node(state: &VectorFieldState, node: Point, t: (f64, f64)) -> Result<IntegralCurve> {
    let rho = NODE_RADIUS * state.epsilon;
    let start = Point::new(node.x1 + rho * t.0, node.x2 + rho * t.1);
    let e = state.epsilon;
    let mut stop = StopConditions::new((node.x1 - 6.0 * e, node.x1 + 6.0 * e));
    stop.max_length = 40.0 * e;
    let c = integrate(state, start, t, &stop)?;
    if c.termination != Termination::HitBoundary {
        return Err(Error::ShootFailure {
            termination: c.termination.name().into(),
            detail: "continuation past the node did not reach the boundary".into(),
        });
    }
    Ok(c)
}

pub fn slope(state: &VectorFieldState, p: Point) -> Result<f64> {
    let (v1, v2) = field(state, p);
    let sc = 1.0 + v1.abs().max(v2.abs());
    if v1.abs() <= 1e-14 * sc {
        return Err(Error::SingularSlope);
    }
    Ok(v2 / v1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeDerivative {
    pub sign: i32,
    pub value: f64,
}

/// Central finite difference in ε of the slope of the field at p.
pub fn slope_eps_derivative(state: &VectorFieldState, p: Point, d_eps: f64) -> Result<SlopeDerivative> {
    if !(d_eps > 0.0 && d_eps < state.epsilon) {
        return Err(Error::invalid("d_eps must lie in (0, epsilon)"));
    }
    let hi = slope(&state.with_epsilon(state.epsilon + d_eps)?, p)?;
    let lo = slope(&state.with_epsilon(state.epsilon - d_eps)?, p)?;
    let value = (hi - lo) / (2.0 * d_eps);
    let sign = if value.abs() <= 1e-8 { 0 } else if value > 0.0 { 1 } else { -1 };
    Ok(SlopeDerivative { sign, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(p: &[f64], m: &[f64], e: f64, o: Orientation) -> VectorFieldState {
        VectorFieldState::new(BoundaryPair::from_coefficients(p, m).unwrap(), e, o).unwrap()
    }

    #[test]
    fn field_examples() {
        let s = st(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 2.0, Orientation::Left);
        let v = field(&s, Point::new(0.0, 0.5));
        assert!((v.0 - 22.5).abs() < 1e-12 && v.1.abs() < 1e-12);
        let q = st(&[0.0, 0.0, 1.0], &[0.0, 2.0], 0.25, Orientation::Left);
        assert_eq!(field(&q, Point::new(1.0, 0.0)), (0.0, 0.0));
        let v = field(&q, Point::new(1.25, 0.25));
        assert!(v.0.abs() < 1e-15 && v.1.abs() < 1e-15);
    }

    #[test]
    fn node_jacobian_is_scalar() {
        let q = st(&[0.0, 0.0, 1.0], &[0.0, 2.0], 0.25, Orientation::Left);
        let j = jacobian(&q, Point::new(1.0, 0.0));
        assert!((j[0][0] - 0.5).abs() < 1e-14 && (j[1][1] - 0.5).abs() < 1e-14);
        assert!(j[0][1].abs() < 1e-14 && j[1][0].abs() < 1e-14);
    }

    #[test]
    fn jacobian_matches_differences() {
        for o in [Orientation::Left, Orientation::Right] {
            let s = st(&[0.3, -1.0, 0.7, 1.1], &[0.2, 0.5, -0.4, 0.6], 0.4, o);
            for &(a, b) in &[(0.1, 0.2), (-1.0, -0.3), (2.0, 0.39)] {
                let p = Point::new(a, b);
                let j = jacobian(&s, p);
                let h = 1e-5;
                let fx = |q: Point| field(&s, q);
                let d1p = fx(Point::new(a + h, b));
                let d1m = fx(Point::new(a - h, b));
                let d2p = fx(Point::new(a, b + h));
                let d2m = fx(Point::new(a, b - h));
                let fd = [
                    [(d1p.0 - d1m.0) / (2.0 * h), (d2p.0 - d2m.0) / (2.0 * h)],
                    [(d1p.1 - d1m.1) / (2.0 * h), (d2p.1 - d2m.1) / (2.0 * h)],
                ];
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((j[r][c] - fd[r][c]).abs() < 1e-6 * (1.0 + j[r][c].abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn stationary_examples() {
        let q = st(&[0.0, 0.0, 1.0], &[0.0, 2.0], 0.25, Orientation::Left);
        let pts = find_stationary_points(&q, (-10.0, 10.0)).unwrap();
        let node = &pts[0];
        assert_eq!(node.kind, StationaryKind::Node);
        assert_eq!(node.location, Point::new(1.0, 0.0));
        let up = pts.iter().find(|p| p.side == Some(SaddleSide::Upper)).unwrap();
        let lo = pts.iter().find(|p| p.side == Some(SaddleSide::Lower)).unwrap();
        assert!((up.location.x1 - 1.25).abs() < 1e-13 && (lo.location.x1 - 1.25).abs() < 1e-13);
        assert_eq!(up.kind, StationaryKind::Saddle);

        let c = st(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 0.1, Orientation::Left);
        let pts = find_stationary_points(&c, (-10.0, 10.0)).unwrap();
        assert!(pts[0].location.x1.abs() < 1e-15);
        let up = pts.iter().find(|p| p.side == Some(SaddleSide::Upper)).unwrap();
        assert!((up.location.x1 - 0.16).abs() < 1e-13);
        assert!(det2(&up.jacobian) < 0.0);

        let none = st(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 2.0, Orientation::Left);
        assert!(find_stationary_points(&none, (-10.0, 10.0)).unwrap().is_empty());
    }

    #[test]
    fn large_epsilon_loses_the_saddle() {
        let c = st(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 10.0, Orientation::Left);
        assert!(matches!(
            find_stationary_points(&c, (-10.0, 10.0)),
            Err(Error::SaddleNotFound { .. })
        ));
    }

    #[test]
    fn integrate_examples() {
        let s = st(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 2.0, Orientation::Left);
        let c = integrate(&s, Point::new(0.0, 0.5), (1.0, 0.0), &StopConditions::new((-10.0, 5.0))).unwrap();
        assert_eq!(c.termination, Termination::Escaped);
        assert!(c.samples.iter().all(|p| (p.x2 - 0.5).abs() <= 1e-8));

        let q = st(&[0.0, 0.0, 1.0], &[0.0, 2.0], 0.25, Orientation::Left);
        assert_eq!(
            integrate(&q, Point::new(1.0, 0.0), (1.0, 0.0), &StopConditions::new((-10.0, 10.0))),
            Err(Error::StationaryStart)
        );
        let c = integrate(&q, Point::new(1.5, 0.2), (-1.0, 0.0), &StopConditions::new((-10.0, 10.0))).unwrap();
        assert_eq!(c.termination, Termination::HitBoundary);
        let last = c.samples.last().unwrap();
        assert!((last.x2.abs() - 0.25).abs() <= 1e-9);
    }

    #[test]
    fn separatrix_examples() {
        let c = st(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 0.1, Orientation::Left);
        let pts = find_stationary_points(&c, (-10.0, 10.0)).unwrap();
        let up = pts.iter().find(|p| p.side == Some(SaddleSide::Upper)).unwrap();
        let curve = shoot_separatrix(&c, up, &pts[0], Launch::Connecting).unwrap();
        assert_eq!(curve.termination, Termination::HitNode);
        let k = arrival_slope(&curve, pts[0].location);
        assert!(k > 0.0 && k < 1.0 - 1e-3, "{k}");
        match shoot_separatrix(&c, up, &pts[0], Launch::Other) {
            Err(Error::ShootFailure { termination, .. }) => assert_eq!(termination, "ESCAPED"),
            other => panic!("{other:?}"),
        }

        let q = st(&[0.0, 0.0, 1.0], &[0.0, 2.0], 0.25, Orientation::Left);
        let pts = find_stationary_points(&q, (-10.0, 10.0)).unwrap();
        let up = pts.iter().find(|p| p.side == Some(SaddleSide::Upper)).unwrap();
        let curve = shoot_separatrix(&q, up, &pts[0], Launch::Connecting).unwrap();
        assert_eq!(curve.termination, Termination::HitNode);
    }

    #[test]
    fn slope_derivative_signs() {
        let s = st(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0], 2.0, Orientation::Left);
        // D± > 0 at (0, 0.5) and D± < 0 at (0, −0.5) for this pair.
        let up = slope_eps_derivative(&s, Point::new(0.0, 0.5), 1e-4).unwrap();
        assert_eq!(up.sign, 1);
        let down = slope_eps_derivative(&s, Point::new(0.0, -0.5), 1e-4).unwrap();
        assert_eq!(down.sign, -1);
    }
}
