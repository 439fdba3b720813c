//! Boundary data f₊, f₋ on the two edges of the strip.
//!
//! Only the polynomial back end exists. Coefficients are stored in ascending
//! powers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

pub const DEFAULT_MAX_DEGREE: usize = 3;

/// Relative tolerance for deciding that f₊″(u₀) = f₋″(u₀).
pub const SIMPLICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    coefficients: Vec<f64>,
}

impl BoundaryFunction {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        Self::with_max_degree(coefficients, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(mut coefficients: Vec<f64>, max_degree: usize) -> Result<Self> {
        if let Some(c) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient {c}")));
        }
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        if coefficients.len() - 1 > max_degree {
            return Err(Error::invalid(format!(
                "degree {} exceeds the maximum {max_degree}",
                coefficients.len() - 1
            )));
        }
        Ok(Self { coefficients })
    }

    /// Internal constructor without the degree cap (derivatives, shifts).
    fn raw(mut coefficients: Vec<f64>) -> Self {
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Coefficient of tᵏ, zero past the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }

    /// k-th derivative at t, any k.
    pub fn d(&self, t: f64, k: usize) -> f64 {
        let n = self.coefficients.len();
        if k >= n {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in (k..n).rev() {
            let mut c = self.coefficients[i];
            for j in 0..k {
                c *= (i - j) as f64;
            }
            acc = acc * t + c;
        }
        acc
    }

    pub fn value(&self, t: f64) -> f64 {
        self.d(t, 0)
    }

    pub fn derivative(&self) -> Self {
        if self.coefficients.len() <= 1 {
            return Self::raw(vec![0.0]);
        }
        Self::raw(
            self.coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// t ↦ f(−t).
    pub fn mirrored(&self) -> Self {
        Self::raw(
            self.coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { *c })
                .collect(),
        )
    }

    /// t ↦ f(t + s).
    pub fn shifted(&self, s: f64) -> Self {
        let n = self.coefficients.len();
        let mut out = vec![0.0; n];
        // Horner in the shifted variable.
        for &c in self.coefficients.iter().rev() {
            for i in (1..n).rev() {
                out[i] = out[i] * s + out[i - 1];
            }
            out[0] = out[0] * s + c;
        }
        Self::raw(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::raw(self.coefficients.iter().map(|c| a * c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coefficients.len().max(other.coefficients.len());
        Self::raw((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Largest |coefficient|, at least one.
    pub fn coefficient_scale(&self) -> f64 {
        self.coefficients.iter().fold(1.0_f64, |a, c| a.max(c.abs()))
    }
}

/// d^order f / dt^order at t for order in 0..=3.
pub fn eval(f: &BoundaryFunction, t: f64, order: u32) -> Result<f64> {
    if order > 3 {
        return Err(Error::invalid(format!("derivative order {order} outside 0..=3")));
    }
    Ok(f.d(t, order as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub f_plus: BoundaryFunction,
    pub f_minus: BoundaryFunction,
}

impl BoundaryPair {
    pub fn new(f_plus: BoundaryFunction, f_minus: BoundaryFunction) -> Self {
        Self { f_plus, f_minus }
    }

    pub fn from_coefficients(plus: &[f64], minus: &[f64]) -> Result<Self> {
        Ok(Self::new(
            BoundaryFunction::new(plus.to_vec())?,
            BoundaryFunction::new(minus.to_vec())?,
        ))
    }

    /// Exchange the roles of f₊ and f₋ (reflection x₂ ↦ −x₂).
    pub fn swapped(&self) -> Self {
        Self::new(self.f_minus.clone(), self.f_plus.clone())
    }

    /// Both functions reflected t ↦ −t (reflection x₁ ↦ −x₁).
    pub fn mirrored(&self) -> Self {
        Self::new(self.f_plus.mirrored(), self.f_minus.mirrored())
    }

    pub fn fp(&self, t: f64, k: usize) -> f64 {
        self.f_plus.d(t, k)
    }

    pub fn fm(&self, t: f64, k: usize) -> f64 {
        self.f_minus.d(t, k)
    }

    /// f₊′ − f₋′ as a polynomial.
    pub fn derivative_difference(&self) -> BoundaryFunction {
        self.f_plus.derivative().sub(&self.f_minus.derivative())
    }

    pub fn max_degree(&self) -> usize {
        self.f_plus.degree().max(self.f_minus.degree())
    }

    /// max |f±| over a sampled interval, at least one.
    pub fn value_scale(&self, a: f64, b: f64) -> f64 {
        let n = 64;
        let mut s = 1.0_f64;
        for i in 0..=n {
            let t = a + (b - a) * i as f64 / n as f64;
            s = s.max(self.fp(t, 0).abs()).max(self.fm(t, 0).abs());
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRoot {
    pub u0: f64,
    pub simple: bool,
}

/// All real roots of f₊′ − f₋′ in `window`, ascending.
pub fn derivative_difference_roots(
    pair: &BoundaryPair,
    window: (f64, f64),
) -> Result<Vec<DerivativeRoot>> {
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::invalid(format!("window [{a}, {b}] must be finite and ordered")));
    }
    let q = pair.derivative_difference();
    if q.is_zero() {
        // No isolated roots; the pair is handled as a linear patch upstream.
        return Ok(Vec::new());
    }
    let roots = polynomial_roots(&q, a, b);
    Ok(roots
        .into_iter()
        .map(|u0| {
            let d2p = pair.fp(u0, 2);
            let d2m = pair.fm(u0, 2);
            let scale = 1.0_f64.max(d2p.abs()).max(d2m.abs());
            DerivativeRoot {
                u0,
                simple: (d2p - d2m).abs() > SIMPLICITY_TOL * scale,
            }
        })
        .collect())
}

/// Real roots of a polynomial in [a, b], ascending, without duplicates.
pub fn polynomial_roots(p: &BoundaryFunction, a: f64, b: f64) -> Vec<f64> {
    let mut roots = match p.degree() {
        0 => Vec::new(),
        1 => vec![-p.coeff(0) / p.coeff(1)],
        2 => quadratic_roots(p.coeff(2), p.coeff(1), p.coeff(0)),
        _ => {
            // Critical points split the window into monotone pieces.
            let crit = polynomial_roots(&p.derivative(), a, b);
            let mut knots = vec![a];
            knots.extend(crit.iter().copied());
            knots.push(b);
            let scale = p.coefficient_scale() * (1.0 + a.abs().max(b.abs())).powi(p.degree() as i32);
            let mut out = Vec::new();
            for w in knots.windows(2) {
                let (l, r) = (w[0], w[1]);
                let (fl, fr) = (p.value(l), p.value(r));
                if fl.abs() <= 1e-14 * scale {
                    out.push(l);
                } else if fl * fr < 0.0 {
                    out.push(bisect(|t| p.value(t), l, r, 1e-15 * (1.0 + l.abs())));
                }
            }
            if p.value(b).abs() <= 1e-14 * scale {
                out.push(b);
            }
            out
        }
    };
    // Newton polish, then restrict to the window.
    let dp = p.derivative();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = dp.value(*r);
            if d == 0.0 {
                break;
            }
            let step = p.value(*r) / d;
            if !step.is_finite() || step.abs() > 1e-6 * (1.0 + r.abs()) {
                break;
            }
            *r -= step;
        }
    }
    roots.retain(|r| r.is_finite() && *r >= a && *r <= b);
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + x.abs()));
    roots
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    let tol = 1e-14 * (b * b).max((4.0 * a * c).abs());
    if disc < -tol {
        return Vec::new();
    }
    if disc.abs() <= tol {
        return vec![-b / (2.0 * a)];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let mut v = vec![r1, r2];
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}
