//! The global candidate: a left-to-right plan of regions separated by
//! diagonal seams, each with its own evaluator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{derivative_difference_roots, BoundaryPair};
use crate::error::{Error, Result};
use crate::fissure::{build_fissure, classify_fissure, flank_margins, FissureKind, FissureLayout};
use crate::foliation::{left_candidate_eval, left_condition, right_candidate_eval, right_condition};
use crate::geometry::{Family, Point, RegionDescriptor, RegionKind, Strip};
use crate::herringbone::{herringbone_eval, Orientation, Spine};

/// Coefficients equal up to this relative gap are treated as equal.
pub const COEFF_TOL: f64 = 1e-12;
/// Samples per simple region when re-checking the foliation conditions.
const CONDITION_SAMPLES: usize = 400;

/// Parameters of the closed form on the middle triangle of a quadratic pair.
/// `reflected` means the closed form was derived for the swapped pair and is
/// evaluated at (x₁, −x₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleParams {
    pub u0: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    /// Coefficient of (x₂ − ε).
    pub k: f64,
    pub reflected: bool,
}

impl TriangleParams {
    pub fn vertices(&self, e: f64) -> [Point; 3] {
        let s = if self.reflected { -1.0 } else { 1.0 };
        [
            Point::new(self.u0 - 2.0 * e, s * e),
            Point::new(self.u0, -s * e),
            Point::new(self.u0 + 2.0 * e, s * e),
        ]
    }

    fn eval(&self, e: f64, p: Point) -> f64 {
        let x2 = if self.reflected { -p.x2 } else { p.x2 };
        self.a2 * (p.x1 * p.x1 - x2 * x2 + e * e) + self.a1 * p.x1 + self.k * (x2 - e) + self.a0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Evaluator {
    SimpleR,
    SimpleL,
    /// B = a₂(x₁² − x₂² + ε²) + a₁x₁ + b·x₂ + c.
    LinearPatch { a2: f64, a1: f64, b: f64, c: f64 },
    Triangle(TriangleParams),
    HerringboneInfinite { spine: Spine },
    Fissure { layout: Box<FissureLayout> },
}

impl Evaluator {
    pub fn tag(&self) -> &'static str {
        match self {
            Evaluator::SimpleR => "SIMPLE_R",
            Evaluator::SimpleL => "SIMPLE_L",
            Evaluator::LinearPatch { .. } => "LINEAR_PATCH",
            Evaluator::Triangle(_) => "TRIANGLE",
            Evaluator::HerringboneInfinite { .. } => "HERRINGBONE_INFINITE",
            Evaluator::Fissure { .. } => "FISSURE",
        }
    }
}

/// A diagonal segment family(p) = index separating two consecutive regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seam {
    pub family: Family,
    pub index: f64,
}

impl Seam {
    /// Positive strictly to the right of the seam.
    pub fn side(&self, p: Point) -> f64 {
        self.family.index_of(p) - self.index
    }

    /// Point of the seam at height x₂.
    pub fn at(&self, x2: f64) -> Point {
        match self.family {
            Family::Right => Point::new(self.index + x2, x2),
            Family::Left => Point::new(self.index - x2, x2),
        }
    }

    /// Unit-free direction that crosses the seam from left to right.
    pub fn crossing(&self) -> (f64, f64) {
        self.family.other().direction()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub region: RegionDescriptor,
    pub evaluator: Evaluator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSurface {
    pub strip: Strip,
    pub pair: BoundaryPair,
    pub window: (f64, f64),
    pub plan: Vec<PlanEntry>,
    /// `seams[i]` separates `plan[i]` from `plan[i + 1]`.
    pub seams: Vec<Seam>,
}

fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedConfiguration(msg.into())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COEFF_TOL * 1.0_f64.max(a.abs()).max(b.abs())
}

fn whole_line(kind: RegionKind, evaluator: Evaluator) -> PlanEntry {
    PlanEntry {
        region: RegionDescriptor { kind, u_start: f64::NEG_INFINITY, u_end: f64::INFINITY },
        evaluator,
    }
}

pub fn build_candidate(pair: &BoundaryPair, strip: &Strip, window: (f64, f64)) -> Result<CandidateSurface> {
    if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
        return Err(Error::invalid(format!("window [{}, {}] must be finite and ordered", window.0, window.1)));
    }
    if pair.max_degree() > 3 {
        return Err(unsupported(format!("degree {} exceeds 3", pair.max_degree())));
    }
    let e = strip.epsilon;
    let (p, m) = (&pair.f_plus, &pair.f_minus);
    let c = |k: usize| (p.coeff(k), m.coeff(k));
    let ((a3p, a3m), (a2p, a2m), (a1p, a1m), (a0p, a0m)) = (c(3), c(2), c(1), c(0));
    let done = |plan: Vec<PlanEntry>, seams: Vec<Seam>| CandidateSurface {
        strip: *strip,
        pair: pair.clone(),
        window,
        plan,
        seams,
    };

    // (a) f₊ − f₋ constant.
    if pair.derivative_difference().is_zero() {
        if a3p != 0.0 {
            return Err(unsupported("f₊ − f₋ is constant with a cubic term; the spine would lie on the axis"));
        }
        let ev = Evaluator::LinearPatch { a2: a2p, a1: a1p, b: (a0p - a0m) / (2.0 * e), c: 0.5 * (a0p + a0m) };
        return Ok(done(vec![whole_line(RegionKind::LinearPatch, ev)], vec![]));
    }

    if close(a3p, a3m) {
        let a3 = 0.5 * (a3p + a3m);
        let d1 = a1p - a1m;
        if a3 == 0.0 || close(a3, 0.0) {
            if close(a2p, a2m) {
                // (b) constant nonzero difference of derivatives.
                let entry = if d1 > 0.0 {
                    whole_line(RegionKind::R, Evaluator::SimpleR)
                } else {
                    whole_line(RegionKind::L, Evaluator::SimpleL)
                };
                return Ok(done(vec![entry], vec![]));
            }
            // (c) quadratic with distinct leading coefficients.
            return Ok(quadratic_plan(pair, strip, window));
        }
        if close(a2p, a2m) {
            // (d) equal-leading cubic.
            let eps0 = (d1.abs() / (12.0 * a3.abs())).sqrt();
            if e <= eps0 {
                let entry = if d1 > 0.0 {
                    whole_line(RegionKind::R, Evaluator::SimpleR)
                } else {
                    whole_line(RegionKind::L, Evaluator::SimpleL)
                };
                return Ok(done(vec![entry], vec![]));
            }
            let o = if a3 > 0.0 { Orientation::Left } else { Orientation::Right };
            let t = d1 / (12.0 * a3 * e);
            let spine = Spine::constant(pair, strip, o, t, window, 257)?;
            let ev = Evaluator::HerringboneInfinite { spine };
            return Ok(done(vec![whole_line(RegionKind::HerringboneInfinite, ev)], vec![]));
        }
    }

    // (e) fissures at simple roots of f₊′ − f₋′.
    let q = pair.derivative_difference();
    let bound = 1.0 + (0..q.degree()).map(|k| (q.coeff(k) / q.coeff(q.degree())).abs()).fold(0.0, f64::max);
    let roots = derivative_difference_roots(pair, (-bound, bound))?;
    if roots.is_empty() {
        return Err(unsupported("f₊′ − f₋′ has no real root; configuration outside the implemented layouts"));
    }
    if let Some(r) = roots.iter().find(|r| !r.simple) {
        return Err(unsupported(format!("multiple root of f₊′ − f₋′ at u₀ = {}", r.u0)));
    }
    let mut layouts = Vec::with_capacity(roots.len());
    for r in &roots {
        classify_fissure(pair, r.u0)?;
        let l = build_fissure(pair, strip, r.u0)?;
        flank_margins(&l, pair, strip)?;
        layouts.push(l);
    }
    fissure_plan(pair, strip, window, layouts).map(|(plan, seams)| done(plan, seams))
}

fn quadratic_plan(pair: &BoundaryPair, strip: &Strip, window: (f64, f64)) -> CandidateSurface {
    let e = strip.epsilon;
    let reflected = pair.f_plus.coeff(2) < pair.f_minus.coeff(2);
    let q = if reflected { pair.swapped() } else { pair.clone() };
    let (a2p, a2m) = (q.f_plus.coeff(2), q.f_minus.coeff(2));
    let (a1p, a1m) = (q.f_plus.coeff(1), q.f_minus.coeff(1));
    let (a0p, a0m) = (q.f_plus.coeff(0), q.f_minus.coeff(0));
    let u0 = (a1m - a1p) / (2.0 * (a2p - a2m));
    let k = (a0p - a0m) / (2.0 * e) - (a1p - a1m).powi(2) / (8.0 * e * (a2p - a2m));
    let tri = TriangleParams { u0, a2: a2p, a1: a1p, a0: a0p, k, reflected };
    // Reflection in x₂ swaps the two diagonal families.
    let (left, right) = if reflected {
        ((RegionKind::R, Evaluator::SimpleR, Family::Right), (RegionKind::L, Evaluator::SimpleL, Family::Left))
    } else {
        ((RegionKind::L, Evaluator::SimpleL, Family::Left), (RegionKind::R, Evaluator::SimpleR, Family::Right))
    };
    let plan = vec![
        PlanEntry { region: RegionDescriptor { kind: left.0, u_start: f64::NEG_INFINITY, u_end: u0 - e }, evaluator: left.1 },
        PlanEntry { region: RegionDescriptor { kind: RegionKind::Triangle, u_start: u0 - e, u_end: u0 + e }, evaluator: Evaluator::Triangle(tri) },
        PlanEntry { region: RegionDescriptor { kind: right.0, u_start: u0 + e, u_end: f64::INFINITY }, evaluator: right.1 },
    ];
    let seams = vec![Seam { family: left.2, index: u0 - e }, Seam { family: right.2, index: u0 + e }];
    CandidateSurface { strip: *strip, pair: pair.clone(), window, plan, seams }
}

/// Simple family on each side of a fissure.
fn flank_families(kind: FissureKind) -> (Family, Family) {
    match kind {
        FissureKind::SW | FissureKind::SE => (Family::Left, Family::Right),
        FissureKind::NW | FissureKind::NE => (Family::Right, Family::Left),
    }
}

fn simple_entry(f: Family, a: f64, b: f64) -> Result<PlanEntry> {
    Ok(match f {
        Family::Right => PlanEntry { region: RegionDescriptor::new(RegionKind::R, a, b)?, evaluator: Evaluator::SimpleR },
        Family::Left => PlanEntry { region: RegionDescriptor::new(RegionKind::L, a, b)?, evaluator: Evaluator::SimpleL },
    })
}

fn fissure_plan(
    pair: &BoundaryPair,
    strip: &Strip,
    window: (f64, f64),
    mut layouts: Vec<FissureLayout>,
) -> Result<(Vec<PlanEntry>, Vec<Seam>)> {
    layouts.sort_by(|a, b| a.u0.partial_cmp(&b.u0).unwrap());
    let mut plan = Vec::new();
    let mut seams = Vec::new();
    let mut prev_end = f64::NEG_INFINITY;
    let mut prev_family: Option<Family> = None;
    for l in layouts {
        let (lf, rf) = flank_families(l.orientation);
        if let Some(pf) = prev_family {
            if pf != lf {
                return Err(unsupported(format!(
                    "{:?} fissure at u₀ = {} needs a {:?} flank but its left neighbour provides {:?}",
                    l.orientation, l.u0, lf, pf
                )));
            }
        }
        let (a, b) = (l.region.u_start, l.region.u_end);
        if !(a > prev_end) {
            return Err(unsupported(format!("fissure regions overlap at u = {a}")));
        }
        plan.push(simple_entry(lf, prev_end, a)?);
        seams.push(Seam { family: lf, index: a });
        plan.push(PlanEntry { region: l.region, evaluator: Evaluator::Fissure { layout: Box::new(l) } });
        seams.push(Seam { family: rf, index: b });
        prev_end = b;
        prev_family = Some(rf);
    }
    plan.push(simple_entry(prev_family.unwrap(), prev_end, f64::INFINITY)?);

    // The simple flanks must satisfy their foliation conditions throughout.
    let e = strip.epsilon;
    for entry in &plan {
        let (cond, name): (&dyn Fn(f64) -> bool, &str) = match entry.evaluator {
            Evaluator::SimpleR => (&|u| right_condition(pair, strip, u), "right"),
            Evaluator::SimpleL => (&|u| left_condition(pair, strip, u), "left"),
            _ => continue,
        };
        let a = entry.region.u_start.max(window.0 - 2.0 * e);
        let b = entry.region.u_end.min(window.1 + 2.0 * e);
        if a >= b {
            continue;
        }
        for i in 0..=CONDITION_SAMPLES {
            let u = a + (b - a) * i as f64 / CONDITION_SAMPLES as f64;
            if !cond(u) {
                return Err(unsupported(format!(
                    "{name} foliation condition fails at u = {u} inside [{}, {}]",
                    entry.region.u_start, entry.region.u_end
                )));
            }
        }
    }
    Ok((plan, seams))
}

impl CandidateSurface {
    /// Index of the region owning p; a point on a seam belongs to the region
    /// on its left.
    pub fn owner(&self, p: Point) -> usize {
        self.seams.iter().filter(|s| s.side(p) > 0.0).count()
    }

    pub fn evaluate(&self, p: Point) -> Result<f64> {
        self.strip.check(p)?;
        self.eval_region(self.owner(p), p)
    }

    /// Evaluate with the formula of region `i`, wherever that formula is defined.
    pub fn eval_region(&self, i: usize, p: Point) -> Result<f64> {
        let (pair, strip) = (&self.pair, &self.strip);
        let e = strip.epsilon;
        match &self.plan[i].evaluator {
            Evaluator::SimpleR => right_candidate_eval(pair, strip, p),
            Evaluator::SimpleL => left_candidate_eval(pair, strip, p),
            Evaluator::LinearPatch { a2, a1, b, c } => {
                strip.check(p)?;
                Ok(a2 * (p.x1 * p.x1 - p.x2 * p.x2 + e * e) + a1 * p.x1 + b * p.x2 + c)
            }
            Evaluator::Triangle(t) => {
                strip.check(p)?;
                Ok(t.eval(e, p))
            }
            Evaluator::HerringboneInfinite { spine } => herringbone_eval(pair, strip, spine, p),
            Evaluator::Fissure { layout } => herringbone_eval(pair, strip, &layout.spine, p),
        }
    }

    /// max(1, |f±|) over the window widened by 2ε.
    pub fn scale(&self) -> f64 {
        let e = self.strip.epsilon;
        self.pair.value_scale(self.window.0 - 2.0 * e, self.window.1 + 2.0 * e)
    }

    pub fn fissures(&self) -> impl Iterator<Item = &FissureLayout> {
        self.plan.iter().filter_map(|p| match &p.evaluator {
            Evaluator::Fissure { layout } => Some(layout.as_ref()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub n_points: usize,
    pub h: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub boundary_residual: f64,
    pub concavity_violation: f64,
    pub seam_c0_gap: f64,
    pub seam_c1_gap: f64,
    /// Index 0 counts points matching none of the four conditions.
    pub mishas_class_counts: [usize; 5],
    pub scale: f64,
    pub passes: bool,
}

/// Tolerances of the report verdict, relative to the scale.
pub const BOUNDARY_TOL: f64 = 1e-10;
pub const CONCAVITY_TOL: f64 = 1e-9;
pub const SEAM_C1_TOL: f64 = 1e-5;
/// Linearity is accepted up to this multiple of the scale.
const LINEAR_TOL: f64 = 1e-9;

const DIAGONALS: [(f64, f64); 2] = [(1.0, 1.0), (1.0, -1.0)];

fn shift(p: Point, d: (f64, f64), t: f64) -> Point {
    Point::new(p.x1 + t * d.0, p.x2 + t * d.1)
}

pub fn verify_candidate(c: &CandidateSurface, sampling: Sampling) -> Result<CandidateReport> {
    let e = c.strip.epsilon;
    let h = sampling.h;
    if !(h > 0.0 && h < e / 4.0) {
        return Err(Error::invalid(format!("stencil step {h} must lie in (0, ε/4)")));
    }
    let (w0, w1) = c.window;
    let scale = c.scale();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let n = sampling.n_points.max(1);

    let mut boundary_residual: f64 = 0.0;
    for _ in 0..n {
        let x1 = rng.gen_range(w0..=w1);
        let up = c.evaluate(Point::new(x1, e))? - c.pair.fp(x1, 0);
        let lo = c.evaluate(Point::new(x1, -e))? - c.pair.fm(x1, 0);
        boundary_residual = boundary_residual.max(up.abs()).max(lo.abs());
    }

    let interior: Vec<Point> =
        (0..n).map(|_| Point::new(rng.gen_range(w0..=w1), rng.gen_range(-e + h..=e - h))).collect();
    let per_point: Vec<Result<(f64, usize)>> = interior
        .par_iter()
        .map(|&x| {
            let b = c.evaluate(x)?;
            let mut worst: f64 = 0.0;
            for d in DIAGONALS {
                let (p, q) = (shift(x, d, h), shift(x, d, -h));
                if c.strip.contains(p) && c.strip.contains(q) {
                    worst = worst.max(0.5 * (c.evaluate(p)? + c.evaluate(q)?) - b);
                }
            }
            Ok((worst, mishas_class(c, x, h, scale)?))
        })
        .collect();
    let mut concavity_violation: f64 = 0.0;
    let mut counts = [0usize; 5];
    for r in per_point {
        let (v, k) = r?;
        concavity_violation = concavity_violation.max(v);
        counts[k] += 1;
    }

    let (seam_c0_gap, seam_c1_gap) = seam_gaps(c, 64)?;
    let passes = boundary_residual <= BOUNDARY_TOL * scale
        && concavity_violation <= CONCAVITY_TOL * scale
        && seam_c1_gap <= SEAM_C1_TOL * scale;
    Ok(CandidateReport {
        boundary_residual,
        concavity_violation,
        seam_c0_gap,
        seam_c1_gap,
        mishas_class_counts: counts,
        scale,
        passes,
    })
}

/// Largest value and crossing-derivative mismatches over the seams, from
/// one-sided cubic extrapolation of each neighbouring formula.
pub fn seam_gaps(c: &CandidateSurface, per_seam: usize) -> Result<(f64, f64)> {
    let e = c.strip.epsilon;
    let h = 1e-4 * e;
    let (mut c0, mut c1): (f64, f64) = (0.0, 0.0);
    for (i, s) in c.seams.iter().enumerate() {
        let d = s.crossing();
        for j in 0..per_seam {
            let x2 = -e + 4.0 * h + (2.0 * e - 8.0 * h) * (j as f64 + 0.5) / per_seam as f64;
            let x = s.at(x2);
            let side = |k: usize, sign: f64| -> Result<(f64, f64)> {
                let f = |m: f64| c.eval_region(k, shift(x, d, sign * m * h));
                let (f1, f2, f3, f4) = (f(1.0)?, f(2.0)?, f(3.0)?, f(4.0)?);
                let value = 4.0 * f1 - 6.0 * f2 + 4.0 * f3 - f4;
                let slope = (-13.0 / 3.0 * f1 + 9.5 * f2 - 7.0 * f3 + 11.0 / 6.0 * f4) / h;
                Ok((value, sign * slope))
            };
            let (vl, dl) = side(i, -1.0)?;
            let (vr, dr) = side(i + 1, 1.0)?;
            c0 = c0.max((vl - vr).abs());
            c1 = c1.max((dl - dr).abs());
        }
    }
    Ok((c0, c1))
}

/// Endpoint of the chord through x in direction ±d on the strip boundary.
fn chord_end(e: f64, x: Point, d: (f64, f64), forward: bool) -> Point {
    let s = if forward { 1.0 } else { -1.0 };
    let target = if s * d.1 > 0.0 { e } else { -e };
    let t = (target - x.x2) / d.1;
    Point::new(x.x1 + t * d.0, target)
}

fn linear_on(c: &CandidateSurface, a: Point, b: Point, tol: f64) -> Result<bool> {
    let (fa, fb) = (c.evaluate(a)?, c.evaluate(b)?);
    for k in 1..8 {
        let s = k as f64 / 8.0;
        let p = Point::new(a.x1 + s * (b.x1 - a.x1), a.x2 + s * (b.x2 - a.x2));
        if (c.evaluate(p)? - (fa + s * (fb - fa))).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn locally_linear(c: &CandidateSurface, x: Point, d: (f64, f64), h: f64, tol: f64) -> Result<bool> {
    let h = h.min(0.25 * (c.strip.epsilon - x.x2.abs()));
    let (p, q) = (shift(x, d, h), shift(x, d, -h));
    if !(c.strip.contains(p) && c.strip.contains(q)) {
        return Ok(false);
    }
    Ok((c.evaluate(p)? + c.evaluate(q)? - 2.0 * c.evaluate(x)?).abs() <= tol)
}

/// Which of the four minimality conditions holds at x (0 if none is detected).
pub fn mishas_class(c: &CandidateSurface, x: Point, h: f64, scale: f64) -> Result<usize> {
    let e = c.strip.epsilon;
    let tol = LINEAR_TOL * scale;
    // Keep the neighbourhood stencils inside the strip.
    let h = h.min(0.25 * (e - x.x2.abs()));
    let mut lin = [false; 2];
    let mut ext = [false; 2];
    for (k, d) in DIAGONALS.into_iter().enumerate() {
        lin[k] = locally_linear(c, x, d, h, tol)?;
        ext[k] = linear_on(c, x, chord_end(e, x, d, true), tol)? || linear_on(c, x, chord_end(e, x, d, false), tol)?;
    }
    if lin[0] && lin[1] {
        let other = |d: (f64, f64), o: (f64, f64)| -> Result<bool> {
            Ok(locally_linear(c, shift(x, o, h), d, h, tol)? && locally_linear(c, shift(x, o, -h), d, h, tol)?)
        };
        if other(DIAGONALS[0], DIAGONALS[1])? && other(DIAGONALS[1], DIAGONALS[0])? {
            return Ok(4);
        }
    }
    Ok(if lin[0] && ext[0] {
        1
    } else if lin[1] && ext[1] {
        2
    } else if ext[0] && ext[1] {
        3
    } else {
        0
    })
}

/// Values on an n₁ × n₂ grid of the window × strip, row-major in x₂.
pub fn surface_grid(c: &CandidateSurface, n1: usize, n2: usize) -> Result<Vec<(f64, f64, f64)>> {
    let e = c.strip.epsilon;
    let (w0, w1) = c.window;
    let (n1, n2) = (n1.max(2), n2.max(2));
    let mut out = Vec::with_capacity(n1 * n2);
    for j in 0..n2 {
        let x2 = -e + 2.0 * e * j as f64 / (n2 - 1) as f64;
        for i in 0..n1 {
            let x1 = w0 + (w1 - w0) * i as f64 / (n1 - 1) as f64;
            out.push((x1, x2, c.evaluate(Point::new(x1, x2))?));
        }
    }
    Ok(out)
}
