//! Closed-form reference solutions for polynomial boundary data of degree at
//! most three, and the region layouts they are expected to produce.

use serde::{Deserialize, Serialize};

use crate::assembly::{CandidateSurface, COEFF_TOL};
use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::fissure::FissureKind;
use crate::geometry::{Point, RegionKind, Strip};
use crate::vectorfield::{find_stationary_points, SaddleSide, StationaryKind, VectorFieldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Both boundary functions of degree ≤ 1.
    Linear,
    /// Equal nonzero t² coefficients, no t³ terms.
    QuadraticEqualLeading,
    /// Distinct t² coefficients, no t³ terms.
    QuadraticDistinct,
    /// Equal nonzero t³ and equal t² coefficients.
    CubicEqualLeading,
    /// Equal nonzero t³ and distinct t² coefficients: one fissure.
    CubicSingleFissure,
    /// Distinct t³ coefficients.
    CubicDistinctLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCase {
    pub variant: Variant,
    /// Ascending coefficients a₀..a₃.
    pub plus: [f64; 4],
    pub minus: [f64; 4],
    /// Root of f₊′ − f₋′ where it is unique.
    pub u0: Option<f64>,
    pub epsilon0: Option<f64>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COEFF_TOL * 1.0_f64.max(a.abs()).max(b.abs())
}

impl ClosedFormCase {
    pub fn from_pair(pair: &BoundaryPair) -> Result<Self> {
        if pair.max_degree() > 3 {
            return Err(Error::invalid(format!("degree {} exceeds 3", pair.max_degree())));
        }
        let plus = [0, 1, 2, 3].map(|k| pair.f_plus.coeff(k));
        let minus = [0, 1, 2, 3].map(|k| pair.f_minus.coeff(k));
        let d = |k: usize| plus[k] - minus[k];
        let zero3 = close(plus[3], 0.0) && close(minus[3], 0.0);
        let zero2 = close(plus[2], 0.0) && close(minus[2], 0.0);
        let variant = if !close(plus[3], minus[3]) {
            Variant::CubicDistinctLayout
        } else if !zero3 {
            if close(plus[2], minus[2]) {
                Variant::CubicEqualLeading
            } else {
                Variant::CubicSingleFissure
            }
        } else if zero2 {
            Variant::Linear
        } else if close(plus[2], minus[2]) {
            Variant::QuadraticEqualLeading
        } else {
            Variant::QuadraticDistinct
        };
        let u0 = match variant {
            Variant::QuadraticDistinct | Variant::CubicSingleFissure => Some(-d(1) / (2.0 * d(2))),
            _ => None,
        };
        let epsilon0 = match variant {
            Variant::CubicEqualLeading => Some((d(1).abs() / (12.0 * plus[3].abs())).sqrt()),
            _ => None,
        };
        Ok(Self { variant, plus, minus, u0, epsilon0 })
    }

    pub fn pair(&self) -> BoundaryPair {
        BoundaryPair::from_coefficients(&self.plus, &self.minus).expect("finite coefficients")
    }
}

pub fn epsilon0(case: &ClosedFormCase) -> Result<f64> {
    if case.variant != Variant::CubicEqualLeading {
        return Err(Error::invalid(format!("threshold width needs an equal-leading cubic, got {:?}", case.variant)));
    }
    let d1 = case.plus[1] - case.minus[1];
    if close(case.plus[1], case.minus[1]) {
        return Err(Error::invalid("a₁⁺ = a₁⁻: the threshold width vanishes"));
    }
    Ok((d1.abs() / (12.0 * case.plus[3].abs())).sqrt())
}

fn poly(c: &[f64; 4], t: f64) -> f64 {
    ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
}

fn dpoly(c: &[f64; 4], t: f64) -> f64 {
    (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1]
}

/// Chord value on the right diagonal through p.
fn right_chord(c: &ClosedFormCase, e: f64, p: Point) -> f64 {
    let u = p.x1 - p.x2;
    ((e + p.x2) * poly(&c.plus, u + e) + (e - p.x2) * poly(&c.minus, u - e)) / (2.0 * e)
}

fn left_chord(c: &ClosedFormCase, e: f64, p: Point) -> f64 {
    let u = p.x1 + p.x2;
    ((e + p.x2) * poly(&c.plus, u - e) + (e - p.x2) * poly(&c.minus, u + e)) / (2.0 * e)
}

/// Left herringbone with constant spine T on data (fp, fm).
fn constant_herringbone(fp: &[f64; 4], fm: &[f64; 4], e: f64, t: f64, p: Point) -> f64 {
    let value_on_spine = |u: f64| {
        let (tp, tm) = (u + t - e, u - t - e);
        (e * e - t * t) / (2.0 * e * t) * ((e + t) * dpoly(fp, tp) - (e - t) * dpoly(fm, tm))
            + ((e + t) * poly(fp, tp) + (e - t) * poly(fm, tm)) / (2.0 * e)
    };
    if p.x2 >= t {
        let u = p.x1 + p.x2 - t;
        ((e - p.x2) * value_on_spine(u) + (p.x2 - t) * poly(fp, u + t - e)) / (e - t)
    } else {
        let u = p.x1 - p.x2 + t;
        ((e + p.x2) * value_on_spine(u) + (t - p.x2) * poly(fm, u - t - e)) / (e + t)
    }
}

fn mirror(c: &[f64; 4]) -> [f64; 4] {
    [c[0], -c[1], c[2], -c[3]]
}

fn outside(p: Point, reason: impl Into<String>) -> Error {
    Error::OutOfRegion { x1: p.x1, x2: p.x2, reason: reason.into() }
}

pub fn closed_form_eval(case: &ClosedFormCase, strip: &Strip, p: Point) -> Result<f64> {
    strip.check(p)?;
    let e = strip.epsilon;
    let (pl, mi) = (&case.plus, &case.minus);
    let d1 = pl[1] - mi[1];
    match case.variant {
        Variant::Linear | Variant::QuadraticEqualLeading => {
            if close(pl[1], mi[1]) {
                let a2 = pl[2];
                Ok(a2 * (p.x1 * p.x1 - p.x2 * p.x2 + e * e)
                    + pl[1] * p.x1
                    + (pl[0] - mi[0]) / (2.0 * e) * p.x2
                    + 0.5 * (pl[0] + mi[0]))
            } else if d1 > 0.0 {
                Ok(right_chord(case, e, p))
            } else {
                Ok(left_chord(case, e, p))
            }
        }
        Variant::QuadraticDistinct => {
            // Reflection in x₂ reduces a₂⁺ < a₂⁻ to a₂⁺ > a₂⁻.
            let (fp, fm, q) = if pl[2] > mi[2] { (pl, mi, p) } else { (mi, pl, Point::new(p.x1, -p.x2)) };
            let u0 = case.u0.expect("quadratic root");
            let tol = 1e-12 * (1.0 + u0.abs() + e);
            if q.x1 + q.x2 < u0 - e - tol || q.x1 - q.x2 > u0 + e + tol {
                return Err(outside(p, "outside the triangle"));
            }
            let (da2, da1, da0) = (fp[2] - fm[2], fp[1] - fm[1], fp[0] - fm[0]);
            let k = da0 / (2.0 * e) - da1 * da1 / (8.0 * e * da2);
            Ok(fp[2] * (q.x1 * q.x1 - q.x2 * q.x2 + e * e) + fp[1] * q.x1 + k * (q.x2 - e) + fp[0])
        }
        Variant::CubicEqualLeading => {
            let e0 = epsilon0(case).map_err(|_| Error::Unsupported("spine on the axis: f₊ − f₋ is constant".into()))?;
            if e <= e0 {
                return Ok(if d1 > 0.0 { right_chord(case, e, p) } else { left_chord(case, e, p) });
            }
            let t = d1 / (12.0 * pl[3] * e);
            if pl[3] > 0.0 {
                Ok(constant_herringbone(pl, mi, e, t, p))
            } else {
                // A right herringbone is the mirror image of a left one.
                Ok(constant_herringbone(&mirror(pl), &mirror(mi), e, t, Point::new(-p.x1, p.x2)))
            }
        }
        Variant::CubicSingleFissure | Variant::CubicDistinctLayout => {
            Err(Error::invalid(format!("no closed form for {:?}", case.variant)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeamValue {
    NegInfinity,
    PosInfinity,
    Exact { value: f64 },
    /// Only known once the fissure spine has been shot.
    FromBuild { name: String },
}

impl SeamValue {
    fn exact(value: f64) -> Self {
        SeamValue::Exact { value }
    }

    fn from_build(name: &str) -> Self {
        SeamValue::FromBuild { name: name.into() }
    }

    pub fn matches(&self, v: f64, tol: f64) -> bool {
        match self {
            SeamValue::NegInfinity => v == f64::NEG_INFINITY,
            SeamValue::PosInfinity => v == f64::INFINITY,
            SeamValue::Exact { value } => (v - value).abs() <= tol,
            SeamValue::FromBuild { .. } => v.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRegion {
    pub kind: RegionKind,
    pub start: SeamValue,
    pub end: SeamValue,
    /// Constant spine height of an infinite herringbone.
    pub spine_t: Option<f64>,
}

fn region(kind: RegionKind, start: SeamValue, end: SeamValue) -> ExpectedRegion {
    ExpectedRegion { kind, start, end, spine_t: None }
}

fn whole(kind: RegionKind) -> Vec<ExpectedRegion> {
    vec![region(kind, SeamValue::NegInfinity, SeamValue::PosInfinity)]
}

fn simple_by_sign(d1: f64) -> Vec<ExpectedRegion> {
    whole(if d1 > 0.0 { RegionKind::R } else { RegionKind::L })
}

fn fissure_kind(kind: FissureKind) -> RegionKind {
    kind.region_kind()
}

/// Flank families of a fissure, left then right.
fn flanks(kind: FissureKind) -> (RegionKind, RegionKind) {
    match kind {
        FissureKind::SW | FissureKind::SE => (RegionKind::L, RegionKind::R),
        FissureKind::NW | FissureKind::NE => (RegionKind::R, RegionKind::L),
    }
}

/// Fissure region bounds: (v, saddle) for W kinds and (saddle, v) for E kinds.
fn fissure_bounds(kind: FissureKind, saddle: SeamValue, v: SeamValue) -> (SeamValue, SeamValue) {
    match kind {
        FissureKind::SW | FissureKind::NW => (v, saddle),
        FissureKind::SE | FissureKind::NE => (saddle, v),
    }
}

fn single_fissure_kind(a3: f64, da2: f64) -> FissureKind {
    match (a3 > 0.0, da2 > 0.0) {
        (true, true) => FissureKind::SW,
        (false, true) => FissureKind::SE,
        (true, false) => FissureKind::NW,
        (false, false) => FissureKind::NE,
    }
}

/// Saddle abscissa from the stationary-point search.
fn numeric_saddle(pair: &BoundaryPair, e: f64, u0: f64, kind: FissureKind) -> Result<f64> {
    let state = VectorFieldState::new(pair.clone(), e, kind.orientation())?;
    let w = 1e-6 * (1.0 + u0.abs());
    let pts = find_stationary_points(&state, (u0 - w, u0 + w))?;
    let node = pts
        .iter()
        .find(|p| p.kind == StationaryKind::Node && (p.location.x1 - u0).abs() <= 1e-9 * (1.0 + u0.abs()))
        .ok_or_else(|| Error::SaddleNotFound { node: u0, reason: "no node".into() })?;
    let side = match kind {
        FissureKind::SW | FissureKind::SE => SaddleSide::Upper,
        FissureKind::NW | FissureKind::NE => SaddleSide::Lower,
    };
    pts.iter()
        .find(|p| p.side == Some(side) && p.node_u0 == node.node_u0)
        .map(|p| p.location.x1)
        .ok_or_else(|| Error::SaddleNotFound { node: u0, reason: "no saddle on the expected side".into() })
}

fn swap_kind(k: RegionKind) -> RegionKind {
    match k {
        RegionKind::R => RegionKind::L,
        RegionKind::L => RegionKind::R,
        RegionKind::SW => RegionKind::NW,
        RegionKind::NW => RegionKind::SW,
        RegionKind::SE => RegionKind::NE,
        RegionKind::NE => RegionKind::SE,
        other => other,
    }
}

pub fn reference_layout(case: &ClosedFormCase, strip: &Strip) -> Result<Vec<ExpectedRegion>> {
    let e = strip.epsilon;
    let (pl, mi) = (&case.plus, &case.minus);
    let d1 = pl[1] - mi[1];
    match case.variant {
        Variant::Linear | Variant::QuadraticEqualLeading => {
            if close(pl[1], mi[1]) {
                Ok(whole(RegionKind::LinearPatch))
            } else {
                Ok(simple_by_sign(d1))
            }
        }
        Variant::QuadraticDistinct => {
            let u0 = case.u0.expect("quadratic root");
            let (lo, hi) = (SeamValue::exact(u0 - e), SeamValue::exact(u0 + e));
            let (left, right) = if pl[2] > mi[2] { (RegionKind::L, RegionKind::R) } else { (RegionKind::R, RegionKind::L) };
            Ok(vec![
                region(left, SeamValue::NegInfinity, lo.clone()),
                region(RegionKind::Triangle, lo, hi.clone()),
                region(right, hi, SeamValue::PosInfinity),
            ])
        }
        Variant::CubicEqualLeading => {
            let e0 = epsilon0(case)?;
            if e <= e0 {
                return Ok(simple_by_sign(d1));
            }
            let t = d1 / (12.0 * pl[3] * e);
            let mut out = whole(RegionKind::HerringboneInfinite);
            out[0].spine_t = Some(t);
            Ok(out)
        }
        Variant::CubicSingleFissure => {
            let (a3, da2) = (pl[3], pl[2] - mi[2]);
            let u0 = case.u0.expect("quadratic root");
            let kind = single_fissure_kind(a3, da2);
            let sx = if matches!(kind, FissureKind::SW | FissureKind::NW) { 1.0 } else { -1.0 };
            let sy = if matches!(kind, FissureKind::SW | FissureKind::SE) { 1.0 } else { -1.0 };
            let saddle = u0 + sx * e + sy * 6.0 * a3 * e * e / da2;
            let v = SeamValue::from_build(if sy > 0.0 { "v-" } else { "v+" });
            let (start, end) = fissure_bounds(kind, SeamValue::exact(saddle), v);
            let (left, right) = flanks(kind);
            Ok(vec![
                region(left, SeamValue::NegInfinity, start.clone()),
                region(fissure_kind(kind), start, end.clone()),
                region(right, end, SeamValue::PosInfinity),
            ])
        }
        Variant::CubicDistinctLayout => {
            if pl[3] < mi[3] {
                // Swapping f± reflects the picture in x₂.
                let swapped = ClosedFormCase { plus: case.minus, minus: case.plus, ..case.clone() };
                let mut out = reference_layout(&swapped, strip)?;
                for r in &mut out {
                    r.kind = swap_kind(r.kind);
                }
                return Ok(out);
            }
            // f₊′ − f₋′ = 3Δa₃t² + 2Δa₂t + Δa₁ with Δa₃ > 0.
            let (a, b, c) = (3.0 * (pl[3] - mi[3]), 2.0 * (pl[2] - mi[2]), d1);
            let disc = b * b - 4.0 * a * c;
            if disc <= 0.0 {
                return Err(Error::Unsupported("f₊′ − f₋′ has no pair of distinct real roots".into()));
            }
            let r = disc.sqrt();
            let q = -0.5 * (b + b.signum() * r);
            let (mut u01, mut u02) = (q / a, c / q);
            if u01 > u02 {
                std::mem::swap(&mut u01, &mut u02);
            }
            let north = if mi[3] > 0.0 { FissureKind::NW } else { FissureKind::NE };
            let south = if pl[3] > 0.0 { FissureKind::SW } else { FissureKind::SE };
            let pair = case.pair();
            let s1 = SeamValue::exact(numeric_saddle(&pair, e, u01, north)?);
            let s2 = SeamValue::exact(numeric_saddle(&pair, e, u02, south)?);
            let (a1, b1) = fissure_bounds(north, s1, SeamValue::from_build("v1+"));
            let (a2, b2) = fissure_bounds(south, s2, SeamValue::from_build("v2-"));
            Ok(vec![
                region(RegionKind::R, SeamValue::NegInfinity, a1.clone()),
                region(fissure_kind(north), a1, b1.clone()),
                region(RegionKind::L, b1, a2.clone()),
                region(fissure_kind(south), a2, b2.clone()),
                region(RegionKind::R, b2, SeamValue::PosInfinity),
            ])
        }
    }
}

/// Whether a built candidate has the expected region kinds and seams.
pub fn layout_matches(expected: &[ExpectedRegion], c: &CandidateSurface, tol: f64) -> bool {
    expected.len() == c.plan.len()
        && expected.iter().zip(&c.plan).all(|(x, p)| {
            x.kind == p.region.kind && x.start.matches(p.region.u_start, tol) && x.end.matches(p.region.u_end, tol)
        })
}
