//! Horizontal herringbones: the spine value A(T), the spine ODE, local
//! derivative data and evaluation on the rib-foliated region.
//!
//! Argument convention at a spine point (u, T):
//! LEFT evaluates f₊ at u + T − ε and f₋ at u − T − ε,
//! RIGHT evaluates f₊ at u − T + ε and f₋ at u + T + ε.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::geometry::{Point, Strip};
use crate::numeric::bisect;

/// Below this |T|/ε the spine value is interpolated through the axis limit.
pub const AXIS_BAND: f64 = 1e-2;
/// Below this |T|/ε the D± quotients are not evaluated.
pub const AXIS_SINGULAR: f64 = 1e-6;
pub const TRANSVERSALITY_TOL: f64 = 1e-6;
pub const N_GAP_TOL: f64 = 1e-9;
pub const CONCAVITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Orientation {
    Left,
    Right,
}

impl Orientation {
    /// +1 for LEFT, −1 for RIGHT.
    pub fn sigma(self) -> f64 {
        match self {
            Orientation::Left => 1.0,
            Orientation::Right => -1.0,
        }
    }
}

/// Arguments of f₊ and f₋ attached to the spine point (u, T).
pub fn spine_args(o: Orientation, eps: f64, u: f64, t: f64) -> (f64, f64) {
    match o {
        Orientation::Left => (u + t - eps, u - t - eps),
        Orientation::Right => (u - t + eps, u + t + eps),
    }
}

fn check_t(strip: &Strip, t: f64) -> Result<()> {
    if t == 0.0 {
        return Err(Error::AxisCrossing);
    }
    if !t.is_finite() || t.abs() > strip.epsilon * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("|T| = {} exceeds epsilon {}", t.abs(), strip.epsilon)));
    }
    Ok(())
}

/// Value A of the candidate on the spine at (u, T).
pub fn a_from_t(pair: &BoundaryPair, strip: &Strip, o: Orientation, u: f64, t: f64) -> Result<f64> {
    check_t(strip, t)?;
    Ok(a_from_t_unchecked(pair, strip.epsilon, o, u, t))
}

pub(crate) fn a_from_t_unchecked(pair: &BoundaryPair, e: f64, o: Orientation, u: f64, t: f64) -> f64 {
    let (tp, tm) = spine_args(o, e, u, t);
    let (fp, fm) = (pair.fp(tp, 0), pair.fm(tm, 0));
    let (dp, dm) = (pair.fp(tp, 1), pair.fm(tm, 1));
    let bracket = match o {
        Orientation::Left => (e + t) * dp - (e - t) * dm,
        Orientation::Right => (e - t) * dm - (e + t) * dp,
    };
    (e * e - t * t) / (2.0 * e * t) * bracket + ((e + t) * fp + (e - t) * fm) / (2.0 * e)
}

/// Limit of A where the spine crosses the axis at strip coordinate `u0`
/// with slope `t_prime`.
pub fn a_on_axis(
    pair: &BoundaryPair,
    strip: &Strip,
    o: Orientation,
    u0: f64,
    t_prime: f64,
) -> Result<f64> {
    let e = strip.epsilon;
    if t_prime == 0.0 || !t_prime.is_finite() {
        return Err(Error::UnsupportedDegenerate(
            "spine slope vanishes at the axis crossing".into(),
        ));
    }
    let w = match o {
        Orientation::Left => u0 - e,
        Orientation::Right => u0 + e,
    };
    let (fp, fm) = (pair.fp(w, 0), pair.fm(w, 0));
    let (dp, dm) = (pair.fp(w, 1), pair.fm(w, 1));
    let (sp, sm) = (pair.fp(w, 2), pair.fm(w, 2));
    let scale2 = 1.0_f64.max(sp.abs()).max(sm.abs());
    if (sp - sm).abs() <= 1e-9 * scale2 {
        return Err(Error::UnsupportedDegenerate(
            "f₊″ = f₋″ at the crossing: multiple root".into(),
        ));
    }
    let scale1 = 1.0_f64.max(dp.abs()).max(dm.abs());
    if (dp - dm).abs() > 1e-8 * scale1 {
        return Err(Error::invalid(format!(
            "f₊′ − f₋′ = {} at the crossing argument {w}; not an axis point",
            dp - dm
        )));
    }
    let s = o.sigma();
    Ok(0.5 * ((fp + fm) + s * e * (dp + dm) + e * e * (sp + sm))
        + s * e * e / (2.0 * t_prime) * (sp - sm))
}

/// D₊, D₋ of the given orientation at the spine point (u, T).
pub fn d_orient(pair: &BoundaryPair, strip: &Strip, o: Orientation, u: f64, t: f64) -> Result<(f64, f64)> {
    check_t(strip, t)?;
    let (tp, tm) = spine_args(o, strip.epsilon, u, t);
    let q = o.sigma() * (pair.fp(tp, 1) - pair.fm(tm, 1)) / (2.0 * t);
    Ok((q - pair.fp(tp, 2), q - pair.fm(tm, 2)))
}

/// T′(u) from the spine equation.
pub fn spine_rhs(pair: &BoundaryPair, strip: &Strip, o: Orientation, u: f64, t: f64) -> Result<f64> {
    let (dp, dm) = d_orient(pair, strip, o, u, t)?;
    let e = strip.epsilon;
    let (num, den) = match o {
        Orientation::Left => ((e - t) * dm - (e + t) * dp, (e - t) * dm + (e + t) * dp),
        Orientation::Right => ((e + t) * dp - (e - t) * dm, (e + t) * dp + (e - t) * dm),
    };
    if !(den > 0.0) {
        return Err(Error::ConcavityBreakdown { u, denominator: den });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineLocalData {
    pub r_plus: f64,
    pub r_minus: f64,
    pub r: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

pub fn local_data(
    pair: &BoundaryPair,
    strip: &Strip,
    o: Orientation,
    u: f64,
    t: f64,
    a: f64,
) -> Result<SpineLocalData> {
    let (d_plus, d_minus) = d_orient(pair, strip, o, u, t)?;
    let e = strip.epsilon;
    let (tp, tm) = spine_args(o, e, u, t);
    let r_minus = (a - pair.fm(tm, 0)) / (e + t);
    let r_plus = (a - pair.fp(tp, 0)) / (e - t);
    let r = r_plus + r_minus;
    let (dp, dm) = (pair.fp(tp, 1), pair.fm(tm, 1));
    let (n_plus, n_minus) = match o {
        Orientation::Left => ((0.5 * r - dp) / (e - t), (0.5 * r - dm) / (e + t)),
        Orientation::Right => (-(0.5 * r + dp) / (e - t), -(0.5 * r + dm) / (e + t)),
    };
    Ok(SpineLocalData { r_plus, r_minus, r, n_plus, n_minus, d_plus, d_minus })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineSample {
    pub u: f64,
    pub t: f64,
    pub a: f64,
    pub t_prime: f64,
}

/// Where a sampled spine meets the axis. Inside (u_lo, u_hi) A is the
/// quartic through the axis limit that matches A and A′ at both band ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPatch {
    pub u: f64,
    pub a: f64,
    pub t_prime: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    /// Coefficients in powers of (u − u_axis).
    pub coeffs: [f64; 5],
}

impl AxisPatch {
    /// `lo` and `hi` are (u, A, A′) at the band ends.
    pub fn new(u: f64, a: f64, t_prime: f64, lo: (f64, f64, f64), hi: (f64, f64, f64)) -> Result<Self> {
        let (xl, xh) = (lo.0 - u, hi.0 - u);
        if !(xl < 0.0 && xh > 0.0) {
            return Err(Error::invalid("axis band does not surround the crossing"));
        }
        // Unknowns c1..c4 with c0 = a.
        let row = |x: f64| [x, x * x, x * x * x, x * x * x * x];
        let drow = |x: f64| [1.0, 2.0 * x, 3.0 * x * x, 4.0 * x * x * x];
        let m = [row(xl), drow(xl), row(xh), drow(xh)];
        let rhs = [lo.1 - a, lo.2, hi.1 - a, hi.2];
        let c = solve_small(m, rhs).ok_or_else(|| Error::invalid("singular axis patch"))?;
        Ok(Self { u, a, t_prime, u_lo: lo.0, u_hi: hi.0, coeffs: [a, c[0], c[1], c[2], c[3]] })
    }

    pub fn value(&self, u: f64) -> f64 {
        let x = u - self.u;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

fn solve_small(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for k in 0..4 {
        let piv = (k..4).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
        if a[piv][k] == 0.0 || !a[piv][k].is_finite() {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..4 {
            let f = a[i][k] / a[k][k];
            for j in k..4 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 4];
    for k in (0..4).rev() {
        let s: f64 = (k + 1..4).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Right-hand side of the transversality relation 2A′ = … at a spine point.
pub fn transversality_rhs(
    pair: &BoundaryPair,
    e: f64,
    o: Orientation,
    u: f64,
    t: f64,
    t_prime: f64,
    a: f64,
) -> f64 {
    let (tp, tm) = spine_args(o, e, u, t);
    let (fp, fm) = (pair.fp(tp, 0), pair.fm(tm, 0));
    match o {
        Orientation::Left => (1.0 - t_prime) * (a - fp) / (e - t) + (1.0 + t_prime) * (a - fm) / (e + t),
        Orientation::Right => (1.0 - t_prime) * (fm - a) / (e + t) + (1.0 + t_prime) * (fp - a) / (e - t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpineShape {
    /// Piecewise cubic Hermite through the samples.
    Sampled,
    /// T ≡ t on the whole line.
    Constant { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spine {
    pub orientation: Orientation,
    pub samples: Vec<SpineSample>,
    pub shape: SpineShape,
    pub axis: Option<AxisPatch>,
}

impl Spine {
    /// Constant spine T ≡ t over the whole line; `window` and `n` only set the
    /// exported samples.
    pub fn constant(
        pair: &BoundaryPair,
        strip: &Strip,
        o: Orientation,
        t: f64,
        window: (f64, f64),
        n: usize,
    ) -> Result<Self> {
        check_t(strip, t)?;
        let n = n.max(3);
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let u = window.0 + (window.1 - window.0) * i as f64 / (n - 1) as f64;
            samples.push(SpineSample {
                u,
                t,
                a: a_from_t_unchecked(pair, strip.epsilon, o, u, t),
                t_prime: spine_rhs(pair, strip, o, u, t)?,
            });
        }
        Ok(Self { orientation: o, samples, shape: SpineShape::Constant { t }, axis: None })
    }

    /// Sampled spine; checks ordering and the |T| ≤ ε, |T′| ≤ 1 bounds.
    pub fn sampled(
        strip: &Strip,
        o: Orientation,
        samples: Vec<SpineSample>,
        axis: Option<AxisPatch>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a sampled spine needs at least two samples"));
        }
        for w in samples.windows(2) {
            if !(w[1].u > w[0].u) {
                return Err(Error::invalid(format!("spine abscissae not increasing at u = {}", w[0].u)));
            }
        }
        for s in &samples {
            if s.t.abs() > strip.epsilon * (1.0 + 1e-9) {
                return Err(Error::invalid(format!("|T| > epsilon at u = {}", s.u)));
            }
            if s.t_prime.abs() > 1.0 + 1e-9 {
                return Err(Error::invalid(format!("|T'| = {} > 1 at u = {}", s.t_prime.abs(), s.u)));
            }
        }
        Ok(Self { orientation: o, samples, shape: SpineShape::Sampled, axis })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.shape, SpineShape::Constant { .. })
    }

    /// Domain in u (infinite for a constant spine).
    pub fn u_range(&self) -> (f64, f64) {
        match self.shape {
            SpineShape::Constant { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            SpineShape::Sampled => (self.samples[0].u, self.samples[self.samples.len() - 1].u),
        }
    }

    fn segment(&self, u: f64) -> usize {
        let s = &self.samples;
        match s.binary_search_by(|p| p.u.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(s.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(s.len() - 2),
        }
    }

    /// T and T′ at u (cubic Hermite between samples, clamped to the ends).
    pub fn t_and_slope(&self, u: f64) -> (f64, f64) {
        if let SpineShape::Constant { t } = self.shape {
            return (t, 0.0);
        }
        let i = self.segment(u);
        let (p, q) = (&self.samples[i], &self.samples[i + 1]);
        let h = q.u - p.u;
        let s = ((u - p.u) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let t = h00 * p.t + h10 * h * p.t_prime + h01 * q.t + h11 * h * q.t_prime;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let dt = dh00 * p.t + dh10 * p.t_prime + dh01 * q.t + dh11 * q.t_prime;
        (t, dt)
    }

    pub fn t_at(&self, u: f64) -> f64 {
        self.t_and_slope(u).0
    }

    /// A at u, consistent with the interpolated T.
    pub fn a_at(&self, pair: &BoundaryPair, strip: &Strip, u: f64) -> f64 {
        let e = strip.epsilon;
        let t = self.t_at(u);
        if let Some(ax) = &self.axis {
            if u > ax.u_lo && u < ax.u_hi {
                return ax.value(u);
            }
        }
        if t == 0.0 {
            // Only reachable without an axis patch; nudge off the axis.
            return a_from_t_unchecked(pair, e, self.orientation, u, AXIS_SINGULAR * e);
        }
        a_from_t_unchecked(pair, e, self.orientation, u, t)
    }
}

/// Which rib of a herringbone carries a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibLocation {
    /// Spine abscissa of the rib.
    pub u: f64,
    pub t: f64,
    pub a: f64,
    /// Above the spine (rib reaching x₂ = ε) or below it.
    pub upper: bool,
    /// Boundary end of the rib.
    pub end: Point,
}

/// Solve g(u) = u + k·T(u) = target on the spine domain.
fn invert(spine: &Spine, k: f64, target: f64) -> Option<f64> {
    if let SpineShape::Constant { t } = spine.shape {
        return Some(target - k * t);
    }
    let (ua, ub) = spine.u_range();
    let g = |u: f64| u + k * spine.t_at(u) - target;
    let (ga, gb) = (g(ua), g(ub));
    let tol = 1e-12 * (1.0 + target.abs());
    if ga > tol || gb < -tol {
        return None;
    }
    if ga >= 0.0 {
        return Some(ua);
    }
    if gb <= 0.0 {
        return Some(ub);
    }
    Some(bisect(g, ua, ub, 1e-13 * (1.0 + ua.abs().max(ub.abs()))))
}

/// Locate the rib through p.
pub fn locate(pair: &BoundaryPair, strip: &Strip, spine: &Spine, p: Point) -> Result<RibLocation> {
    strip.check(p)?;
    let e = strip.epsilon;
    let s = spine.orientation.sigma();
    let tol = 1e-12 * (1.0 + e);
    // Upper ribs: x₁ + σx₂ = u + σT; lower ribs: x₁ − σx₂ = u − σT.
    if let Some(u) = invert(spine, s, p.x1 + s * p.x2) {
        let t = spine.t_at(u);
        if p.x2 >= t - tol {
            let (tp, _) = spine_args(spine.orientation, e, u, t);
            return Ok(RibLocation {
                u,
                t,
                a: spine.a_at(pair, strip, u),
                upper: true,
                end: Point::new(tp, e),
            });
        }
    }
    if let Some(u) = invert(spine, -s, p.x1 - s * p.x2) {
        let t = spine.t_at(u);
        if p.x2 <= t + tol {
            let (_, tm) = spine_args(spine.orientation, e, u, t);
            return Ok(RibLocation {
                u,
                t,
                a: spine.a_at(pair, strip, u),
                upper: false,
                end: Point::new(tm, -e),
            });
        }
    }
    Err(Error::OutOfRegion {
        x1: p.x1,
        x2: p.x2,
        reason: "no rib of the spine passes through the point".into(),
    })
}

/// Value of the herringbone candidate at p.
pub fn herringbone_eval(pair: &BoundaryPair, strip: &Strip, spine: &Spine, p: Point) -> Result<f64> {
    let loc = locate(pair, strip, spine, p)?;
    Ok(rib_value(pair, strip, &loc, p))
}

pub(crate) fn rib_value(pair: &BoundaryPair, strip: &Strip, loc: &RibLocation, p: Point) -> f64 {
    let e = strip.epsilon;
    let (t, a) = (loc.t, loc.a);
    if loc.upper {
        let len = e - t;
        if len <= 1e-14 * e {
            return a;
        }
        (e - p.x2) / len * a + (p.x2 - t) / len * pair.fp(loc.end.x1, 0)
    } else {
        let len = e + t;
        if len <= 1e-14 * e {
            return a;
        }
        (e + p.x2) / len * a + (t - p.x2) / len * pair.fm(loc.end.x1, 0)
    }
}

/// Derivative at x of the interpolating polynomial through the samples' A.
pub(crate) fn lagrange_derivative(pts: &[SpineSample], x: f64) -> f64 {
    let n = pts.len();
    let mut total = 0.0;
    for j in 0..n {
        let mut denom = 1.0;
        for m in 0..n {
            if m != j {
                denom *= pts[j].u - pts[m].u;
            }
        }
        let mut num = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..n {
                if m != j && m != k {
                    prod *= x - pts[m].u;
                }
            }
            num += prod;
        }
        total += pts[j].a * num / denom;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineReport {
    pub transversality_residual: f64,
    /// Spine abscissa of the largest transversality residual.
    pub worst_u: f64,
    pub n_gap: f64,
    pub d_min: f64,
    pub slope_ok: bool,
    pub scale: f64,
}

impl SpineReport {
    pub fn passes(&self) -> bool {
        self.transversality_residual <= TRANSVERSALITY_TOL * self.scale
            && self.n_gap <= N_GAP_TOL * self.scale
            && self.d_min >= -CONCAVITY_SLACK * self.scale
            && self.slope_ok
    }
}

/// Consistency checks of a spine against the transversality relation, the
/// N₊ = N₋ identity, the sign of D± and the slope bound.
pub fn verify_spine(pair: &BoundaryPair, strip: &Strip, spine: &Spine) -> Result<SpineReport> {
    let s = &spine.samples;
    if s.len() < 3 {
        return Err(Error::invalid("spine verification needs at least three samples"));
    }
    let e = strip.epsilon;
    let o = spine.orientation;
    let mut scale = 1.0_f64;
    for p in s {
        let (tp, tm) = spine_args(o, e, p.u, p.t);
        scale = scale.max(p.a.abs()).max(pair.fp(tp, 0).abs()).max(pair.fm(tm, 0).abs());
    }
    let far_from_edges = |t: f64| e - t.abs() > 1e-6 * e;
    // N± divide twice by ε ∓ T; near the boundary ends they are 0/0 limits.
    let n_resolved = |t: f64| e - t.abs() > 1e-2 * e;
    let off_axis = |t: f64| t.abs() >= AXIS_SINGULAR * e;
    // Inside the axis patch A is interpolated, so N₊ = N₋ is not exact there.
    let from_formula = |t: f64| t.abs() >= AXIS_BAND * e;

    let mut transversality: f64 = 0.0;
    let mut worst_u = f64::NAN;
    for i in 1..s.len() - 1 {
        let p1 = &s[i];
        if !far_from_edges(p1.t) {
            continue;
        }
        let width = s.len().min(5);
        let lo = i.saturating_sub(2).min(s.len() - width);
        let hi = lo + width - 1;
        let da = lagrange_derivative(&s[lo..=hi], p1.u);
        let rhs = transversality_rhs(pair, e, o, p1.u, p1.t, p1.t_prime, p1.a);
        let r = (2.0 * da - rhs).abs();
        if r > transversality {
            transversality = r;
            worst_u = p1.u;
        }
    }

    let mut n_gap: f64 = 0.0;
    let mut d_min = f64::INFINITY;
    for p in s {
        if !off_axis(p.t) {
            continue;
        }
        let ld = local_data(pair, strip, o, p.u, p.t, p.a)?;
        if n_resolved(p.t) && from_formula(p.t) {
            n_gap = n_gap.max((ld.n_plus - ld.n_minus).abs());
        }
        d_min = d_min.min(ld.d_plus).min(ld.d_minus);
    }

    let slope_ok = s[1..s.len() - 1].iter().all(|p| p.t_prime.abs() < 1.0);
    Ok(SpineReport {
        transversality_residual: transversality,
        worst_u,
        n_gap,
        d_min,
        slope_ok,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> BoundaryPair {
        BoundaryPair::from_coefficients(&[0.0, 12.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn quad() -> BoundaryPair {
        BoundaryPair::from_coefficients(&[0.0, 0.0, 1.0], &[0.0, 2.0]).unwrap()
    }

    #[test]
    fn a_from_t_examples() {
        let s2 = Strip::new(2.0).unwrap();
        let a = a_from_t(&cubic(), &s2, Orientation::Left, 0.0, 0.5).unwrap();
        assert!((a - 15.9375).abs() < 1e-12);
        let s = Strip::new(0.25).unwrap();
        let a = a_from_t(&quad(), &s, Orientation::Left, 1.2, 0.1).unwrap();
        assert!((a - 1.7385).abs() < 1e-12, "{a}");
        assert_eq!(a_from_t(&quad(), &s, Orientation::Left, 1.0, 0.0), Err(Error::AxisCrossing));
        assert!(matches!(a_from_t(&quad(), &s, Orientation::Left, 1.0, 0.3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spine_rhs_examples() {
        let s2 = Strip::new(2.0).unwrap();
        assert!(spine_rhs(&cubic(), &s2, Orientation::Left, 3.0, 0.5).unwrap().abs() < 1e-15);
        let v = spine_rhs(&cubic(), &s2, Orientation::Left, -1.0, 0.25).unwrap();
        assert!((v - 0.25 * (0.5 - 1.0) / (2.0 - 0.015625)).abs() < 1e-14);
        assert!(matches!(
            spine_rhs(&cubic(), &s2, Orientation::Left, 0.0, 1.5),
            Err(Error::ConcavityBreakdown { .. })
        ));
    }

    #[test]
    fn local_data_identities() {
        let s2 = Strip::new(2.0).unwrap();
        let a = a_from_t(&cubic(), &s2, Orientation::Left, 0.0, 0.5).unwrap();
        let ld = local_data(&cubic(), &s2, Orientation::Left, 0.0, 0.5, a).unwrap();
        assert_eq!(ld.r, ld.r_plus + ld.r_minus);
        // (f₊′ − f₋′)/2T at the rib ends −1.5 and −2.5.
        let target = (cubic().fp(-1.5, 1) - cubic().fm(-2.5, 1)) / 1.0;
        assert!((ld.n_plus - target).abs() < 1e-12 && (ld.n_minus - target).abs() < 1e-12);
        assert!((ld.d_plus - 9.0).abs() < 1e-12 && (ld.d_minus - 15.0).abs() < 1e-12);
        let bad = local_data(&cubic(), &s2, Orientation::Left, 0.0, 0.5, a + 0.1).unwrap();
        assert!((bad.n_plus - bad.n_minus).abs() > 1e-3);
    }

    #[test]
    fn herringbone_eval_examples() {
        let s2 = Strip::new(2.0).unwrap();
        let sp = Spine::constant(&cubic(), &s2, Orientation::Left, 0.5, (-4.0, 4.0), 33).unwrap();
        let v = herringbone_eval(&cubic(), &s2, &sp, Point::new(0.0, 0.5)).unwrap();
        assert!((v - 15.9375).abs() < 1e-12);
        let v = herringbone_eval(&cubic(), &s2, &sp, Point::new(-0.75, 1.25)).unwrap();
        assert!((v + 2.71875).abs() < 1e-12);
        for x1 in [-3.0, 0.1, 2.5] {
            let v = herringbone_eval(&cubic(), &s2, &sp, Point::new(x1, 2.0)).unwrap();
            assert!((v - cubic().fp(x1, 0)).abs() < 1e-10 * (1.0 + v.abs()));
            let v = herringbone_eval(&cubic(), &s2, &sp, Point::new(x1, -2.0)).unwrap();
            assert!((v - cubic().fm(x1, 0)).abs() < 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn verify_constant_spine() {
        let s2 = Strip::new(2.0).unwrap();
        let mut sp = Spine::constant(&cubic(), &s2, Orientation::Left, 0.5, (-3.0, 3.0), 121).unwrap();
        let r = verify_spine(&cubic(), &s2, &sp).unwrap();
        assert!(r.passes(), "{r:?}");
        sp.samples[60].a += 0.1;
        let r = verify_spine(&cubic(), &s2, &sp).unwrap();
        assert!(r.transversality_residual > 1e-2);
        sp.samples[60].a -= 0.1;
        sp.samples[30].t_prime = 1.2;
        assert!(!verify_spine(&cubic(), &s2, &sp).unwrap().slope_ok);
    }

    #[test]
    fn axis_limit_guards() {
        let s = Strip::new(0.25).unwrap();
        assert!(matches!(
            a_on_axis(&quad(), &s, Orientation::Left, 1.25, 0.0),
            Err(Error::UnsupportedDegenerate(_))
        ));
        let same = BoundaryPair::from_coefficients(&[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            a_on_axis(&same, &s, Orientation::Left, 0.25, 0.5),
            Err(Error::UnsupportedDegenerate(_))
        ));
    }

    #[test]
    fn right_is_mirror_of_left() {
        let p = BoundaryPair::from_coefficients(&[0.3, -1.0, 0.7, 1.1], &[0.2, 0.5, -0.4, 0.6]).unwrap();
        let g = p.mirrored();
        let s = Strip::new(0.4).unwrap();
        for &(u, t) in &[(0.3, 0.1), (-1.2, -0.2), (2.0, 0.35)] {
            let ar = a_from_t(&p, &s, Orientation::Right, u, t).unwrap();
            let al = a_from_t(&g, &s, Orientation::Left, -u, t).unwrap();
            assert!((ar - al).abs() < 1e-12);
            let dr = d_orient(&p, &s, Orientation::Right, u, t).unwrap();
            let dl = d_orient(&g, &s, Orientation::Left, -u, t).unwrap();
            assert!((dr.0 - dl.0).abs() < 1e-12 && (dr.1 - dl.1).abs() < 1e-12);
            if let (Ok(r), Ok(l)) = (
                spine_rhs(&p, &s, Orientation::Right, u, t),
                spine_rhs(&g, &s, Orientation::Left, -u, t),
            ) {
                assert!((r + l).abs() < 1e-12);
            }
        }
    }
}
