//! Simple right/left foliations and the concavity fields D±.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::geometry::{Point, Strip};

/// Slack allowed in the foliation inequalities, relative to their term scale.
pub const CONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityField {
    pub d_plus: f64,
    pub d_minus: f64,
}

/// D₊ and D₋ at p; f₊ is taken at x₁ + x₂ and f₋ at x₁ − x₂.
pub fn d_fields(pair: &BoundaryPair, p: Point) -> Result<ConcavityField> {
    if p.x2 == 0.0 {
        return Err(Error::SingularAxis);
    }
    let (a, b) = (p.x1 + p.x2, p.x1 - p.x2);
    let q = (pair.fp(a, 1) - pair.fm(b, 1)) / (2.0 * p.x2);
    Ok(ConcavityField {
        d_plus: q - pair.fp(a, 2),
        d_minus: q - pair.fm(b, 2),
    })
}

pub fn right_candidate_eval(pair: &BoundaryPair, strip: &Strip, p: Point) -> Result<f64> {
    strip.check(p)?;
    let e = strip.epsilon;
    let c = p.x1 - p.x2;
    Ok((e + p.x2) / (2.0 * e) * pair.fp(c + e, 0) + (e - p.x2) / (2.0 * e) * pair.fm(c - e, 0))
}

pub fn left_candidate_eval(pair: &BoundaryPair, strip: &Strip, p: Point) -> Result<f64> {
    strip.check(p)?;
    let e = strip.epsilon;
    let c = p.x1 + p.x2;
    Ok((e + p.x2) / (2.0 * e) * pair.fp(c - e, 0) + (e - p.x2) / (2.0 * e) * pair.fm(c + e, 0))
}

/// The two expressions that must be nonnegative for a right foliation at u,
/// together with their magnitude scale.
pub fn right_expressions(pair: &BoundaryPair, strip: &Strip, u: f64) -> (f64, f64, f64) {
    let e = strip.epsilon;
    let d = pair.fp(u + e, 1) - pair.fm(u - e, 1);
    let s2p = 2.0 * e * pair.fp(u + e, 2);
    let s2m = 2.0 * e * pair.fm(u - e, 2);
    let scale = 1.0_f64
        .max(pair.fp(u + e, 1).abs())
        .max(pair.fm(u - e, 1).abs())
        .max(s2p.abs())
        .max(s2m.abs());
    (d - s2p, d - s2m, scale)
}

/// Left-foliation counterpart of [`right_expressions`].
pub fn left_expressions(pair: &BoundaryPair, strip: &Strip, u: f64) -> (f64, f64, f64) {
    let e = strip.epsilon;
    let d = pair.fm(u + e, 1) - pair.fp(u - e, 1);
    let s2p = 2.0 * e * pair.fp(u - e, 2);
    let s2m = 2.0 * e * pair.fm(u + e, 2);
    let scale = 1.0_f64
        .max(pair.fm(u + e, 1).abs())
        .max(pair.fp(u - e, 1).abs())
        .max(s2p.abs())
        .max(s2m.abs());
    (d - s2p, d - s2m, scale)
}

pub fn right_condition(pair: &BoundaryPair, strip: &Strip, u: f64) -> bool {
    let (a, b, s) = right_expressions(pair, strip, u);
    a >= -CONDITION_SLACK * s && b >= -CONDITION_SLACK * s
}

pub fn left_condition(pair: &BoundaryPair, strip: &Strip, u: f64) -> bool {
    let (a, b, s) = left_expressions(pair, strip, u);
    a >= -CONDITION_SLACK * s && b >= -CONDITION_SLACK * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeparationVerdict {
    RightGlobal,
    LeftGlobal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub verdict: SeparationVerdict,
    /// Smallest sampled expression of the winning family; for an
    /// inconclusive report, that of the family closer to holding.
    pub margin: f64,
}

pub fn uniform_separation_report(
    pair: &BoundaryPair,
    strip: &Strip,
    window: (f64, f64),
    samples: usize,
) -> Result<SeparationReport> {
    if samples < 2 {
        return Err(Error::invalid("uniform separation needs at least two samples"));
    }
    let (a, b) = window;
    let mut min_r = f64::INFINITY;
    let mut min_l = f64::INFINITY;
    for i in 0..samples {
        let u = a + (b - a) * i as f64 / (samples - 1) as f64;
        let (r1, r2, _) = right_expressions(pair, strip, u);
        let (l1, l2, _) = left_expressions(pair, strip, u);
        min_r = min_r.min(r1).min(r2);
        min_l = min_l.min(l1).min(l2);
    }
    let verdict = if min_r > 0.0 {
        SeparationVerdict::RightGlobal
    } else if min_l > 0.0 {
        SeparationVerdict::LeftGlobal
    } else {
        SeparationVerdict::Inconclusive
    };
    let margin = match verdict {
        SeparationVerdict::RightGlobal => min_r,
        SeparationVerdict::LeftGlobal => min_l,
        SeparationVerdict::Inconclusive => min_r.max(min_l),
    };
    Ok(SeparationReport { verdict, margin })
}
