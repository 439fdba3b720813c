//! The strip Ω_ε = {|x₂| ≤ ε}, points, diagonals and region descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a point lies in the strip.
pub const STRIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub epsilon: f64,
}

impl Strip {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x1.is_finite() && p.x2.abs() <= self.epsilon * (1.0 + STRIP_SLACK)
    }

    pub fn check(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "point ({}, {}) outside the strip |x2| <= {}",
                p.x1, p.x2, self.epsilon
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn dist(&self, o: Point) -> f64 {
        (self.x1 - o.x1).hypot(self.x2 - o.x2)
    }
}

/// Endpoints of the segment x₁ − x₂ = const through `p`.
pub fn right_diagonal_endpoints(strip: &Strip, p: Point) -> Result<(Point, Point)> {
    strip.check(p)?;
    let e = strip.epsilon;
    let c = p.x1 - p.x2;
    Ok((Point::new(c - e, -e), Point::new(c + e, e)))
}

/// Endpoints of the segment x₁ + x₂ = const through `p`.
pub fn left_diagonal_endpoints(strip: &Strip, p: Point) -> Result<(Point, Point)> {
    strip.check(p)?;
    let e = strip.epsilon;
    let c = p.x1 + p.x2;
    Ok((Point::new(c + e, -e), Point::new(c - e, e)))
}

/// The two diagonal families. `Right` segments satisfy x₁ − x₂ = const,
/// `Left` segments x₁ + x₂ = const.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    Right,
    Left,
}

impl Family {
    /// The linear form whose level sets are the segments of this family.
    pub fn index_of(self, p: Point) -> f64 {
        match self {
            Family::Right => p.x1 - p.x2,
            Family::Left => p.x1 + p.x2,
        }
    }

    /// Unit-free direction vector of the segments.
    pub fn direction(self) -> (f64, f64) {
        match self {
            Family::Right => (1.0, 1.0),
            Family::Left => (1.0, -1.0),
        }
    }

    pub fn other(self) -> Family {
        match self {
            Family::Right => Family::Left,
            Family::Left => Family::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionKind {
    R,
    L,
    SW,
    SE,
    NW,
    NE,
    Triangle,
    HerringboneInfinite,
    LinearPatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub kind: RegionKind,
    #[serde(with = "ext_f64")]
    pub u_start: f64,
    #[serde(with = "ext_f64")]
    pub u_end: f64,
}

impl RegionDescriptor {
    pub fn new(kind: RegionKind, u_start: f64, u_end: f64) -> Result<Self> {
        if u_start.is_nan() || u_end.is_nan() || u_start > u_end {
            return Err(Error::invalid(format!("region bounds [{u_start}, {u_end}] not ordered")));
        }
        Ok(Self { kind, u_start, u_end })
    }
}

/// Serde adapter writing ±∞ as the strings "-inf" / "inf" so JSON stays valid.
pub mod ext_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
