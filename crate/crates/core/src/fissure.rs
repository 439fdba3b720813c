//! Fissures: herringbones whose spine runs from a boundary saddle through
//! the node (u₀, 0) to the opposite boundary.
//!
//! Seam indices and `saddle_u`, `v` are field abscissae. A field point
//! (x₁, x₂) sits at strip coordinate u = x₁ + ε (LEFT) or x₁ − ε (RIGHT).

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::foliation::{left_condition, right_condition};
use crate::geometry::{Point, RegionDescriptor, RegionKind, Strip};
use crate::herringbone::{
    a_from_t, a_on_axis, d_orient, transversality_rhs, AxisPatch, Orientation, Spine, SpineSample,
    AXIS_BAND, AXIS_SINGULAR,
};
use crate::numeric::bisect;
use crate::vectorfield::{
    arrival_slope, continue_from_node, field, find_stationary_points, shoot_separatrix,
    IntegralCurve, Launch, SaddleSide, StationaryKind, StationaryPoint, VectorFieldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FissureKind {
    SW,
    SE,
    NW,
    NE,
}

impl FissureKind {
    pub fn orientation(self) -> Orientation {
        match self {
            FissureKind::SW | FissureKind::NW => Orientation::Left,
            FissureKind::SE | FissureKind::NE => Orientation::Right,
        }
    }

    pub fn region_kind(self) -> RegionKind {
        match self {
            FissureKind::SW => RegionKind::SW,
            FissureKind::SE => RegionKind::SE,
            FissureKind::NW => RegionKind::NW,
            FissureKind::NE => RegionKind::NE,
        }
    }

    /// Saddle on the upper boundary (S*) or the lower one (N*).
    fn saddle_side(self) -> SaddleSide {
        match self {
            FissureKind::SW | FissureKind::SE => SaddleSide::Upper,
            FissureKind::NW | FissureKind::NE => SaddleSide::Lower,
        }
    }

    /// Sign of T′ along the spine.
    fn slope_sign(self) -> f64 {
        match self {
            FissureKind::SW | FissureKind::NE => 1.0,
            FissureKind::NW | FissureKind::SE => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FissureLayout {
    pub orientation: FissureKind,
    pub u0: f64,
    pub saddle_u: f64,
    pub v: f64,
    pub spine: Spine,
    pub region: RegionDescriptor,
    /// Slope of the spine at the node and at the saddle.
    pub node_slope: f64,
    pub saddle_slope: f64,
}

impl FissureLayout {
    /// Strip abscissa of a field abscissa.
    pub fn strip_u(&self, x1: f64, eps: f64) -> f64 {
        x1 + self.orientation.orientation().sigma() * eps
    }
}

pub fn classify_fissure(pair: &BoundaryPair, u0: f64) -> Result<FissureKind> {
    let (sp, sm) = (pair.fp(u0, 2), pair.fm(u0, 2));
    let scale = 1.0_f64.max(sp.abs()).max(sm.abs());
    if (sp - sm).abs() <= 1e-9 * scale {
        return Err(Error::UnsupportedDegenerate(format!("f₊″ = f₋″ at u₀ = {u0}: not a simple root")));
    }
    let (tp, tm) = (pair.fp(u0, 3), pair.fm(u0, 3));
    let tscale = 1.0_f64.max(tp.abs()).max(tm.abs());
    if sp > sm {
        if tp.abs() <= 1e-9 * tscale {
            return Err(Error::UnsupportedDegenerate(format!("f₊‴(u₀) = 0 at u₀ = {u0}")));
        }
        Ok(if tp > 0.0 { FissureKind::SW } else { FissureKind::SE })
    } else {
        if tm.abs() <= 1e-9 * tscale {
            return Err(Error::UnsupportedDegenerate(format!("f₋‴(u₀) = 0 at u₀ = {u0}")));
        }
        Ok(if tm > 0.0 { FissureKind::NW } else { FissureKind::NE })
    }
}

fn failure(invariant: &str, detail: impl Into<String>) -> Error {
    Error::FissureBuildFailure { invariant: invariant.into(), detail: detail.into() }
}

fn wrap(invariant: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| failure(invariant, e.to_string())
}

pub fn build_fissure(pair: &BoundaryPair, strip: &Strip, u0: f64) -> Result<FissureLayout> {
    let kind = classify_fissure(pair, u0)?;
    let o = kind.orientation();
    let e = strip.epsilon;
    let sig = o.sigma();
    let state = VectorFieldState::new(pair.clone(), e, o)?;
    let pts = find_stationary_points(&state, (u0 - 1e-6 * (1.0 + u0.abs()), u0 + 1e-6 * (1.0 + u0.abs())))
        .map_err(wrap("saddle-bracket"))?;
    let node = pts
        .iter()
        .find(|p| p.kind == StationaryKind::Node && (p.location.x1 - u0).abs() <= 1e-9 * (1.0 + u0.abs()))
        .ok_or_else(|| failure("node", format!("no node at u₀ = {u0}")))?
        .clone();
    let side = kind.saddle_side();
    let saddle: StationaryPoint = pts
        .iter()
        .find(|p| p.side == Some(side) && p.node_u0 == node.node_u0)
        .cloned()
        .ok_or_else(|| failure("saddle-bracket", "saddle missing"))?;
    if saddle.kind != StationaryKind::Saddle {
        return Err(failure("saddle-type", format!("boundary point at {} is not a saddle", saddle.location.x1)));
    }

    let first = shoot_separatrix(&state, &saddle, &node, Launch::Connecting).map_err(wrap("shoot"))?;
    let arrival = arrival_slope(&first, node.location);
    let last = *first.samples.last().unwrap();
    let heading = (node.location.x1 - last.x1).signum();

    // Saddle slope from the launch eigenvector.
    let c = node.jacobian[0][0];
    let k = if c > 0.0 { 0 } else { 1 };
    let ev = saddle.eigenvectors[k];
    let saddle_slope = ev.1 / ev.0;

    let u_axis = u0 + sig * e;
    let s = kind.slope_sign();
    let ctx = Ctx { pair, strip, state: &state, saddle: &saddle, saddle_slope, node: &node, first: &first, u_axis, s };

    // Every direction leaves a star node, so the exit slope is chosen to keep
    // A continuous across the axis.
    let mut k0 = arrival;
    let mut t0 = ctx.trial(k0, heading)?;
    let mut k1 = arrival * (1.0 + 1e-6) + 1e-9;
    let mut t1 = ctx.trial(k1, heading)?;
    for _ in 0..12 {
        if t1.mismatch.abs() <= 1e-13 * t1.scale || t1.mismatch == t0.mismatch {
            break;
        }
        let k2 = k1 - t1.mismatch * (k1 - k0) / (t1.mismatch - t0.mismatch);
        let t2 = ctx.trial(k2, heading)?;
        (k0, t0, k1, t1) = (k1, t1, k2, t2);
    }
    if t0.mismatch.abs() < t1.mismatch.abs() {
        t1 = t0;
    }
    let Trial { samples: pts_s, v, node_slope, .. } = t1;

    let mut samples: Vec<SpineSample> = pts_s
        .iter()
        .map(|&(u, t, tp)| SpineSample { u, t, a: f64::NAN, t_prime: tp })
        .collect();
    let provisional = Spine::sampled(strip, o, samples.clone(), None).map_err(wrap("spine"))?;
    let band = AXIS_BAND * e;
    let (u_lo, u_hi) = ctx.crossings(&provisional, band);
    let edge = |u: f64| -> Result<(f64, f64, f64)> {
        let (t, tp) = provisional.t_and_slope(u);
        let a = a_from_t(pair, strip, o, u, t)?;
        Ok((u, a, 0.5 * transversality_rhs(pair, e, o, u, t, tp, a)))
    };
    // A at the axis carried in from the lower band edge; the closed-form
    // limit only serves as a check since it amplifies errors in T′.
    let lo_edge = edge(u_lo).map_err(wrap("axis"))?;
    let a_axis = carry(lo_edge.0, lo_edge.1, u_axis, 2000, |u, a| {
        let (t, tp) = provisional.t_and_slope(u);
        0.5 * transversality_rhs(pair, e, o, u, t, tp, a)
    });
    let a_limit = a_on_axis(pair, strip, o, u_axis, node_slope).map_err(wrap("axis"))?;
    if (a_limit - a_axis).abs() > 1e-6 * 1.0_f64.max(a_axis.abs()) {
        return Err(failure("axis", format!("axis value {a_axis} disagrees with the limit {a_limit}")));
    }
    let axis = AxisPatch::new(
        u_axis,
        a_axis,
        node_slope,
        lo_edge,
        edge(u_hi).map_err(wrap("axis"))?,
    )
    .map_err(wrap("axis"))?;
    let with_axis = Spine::sampled(strip, o, samples.clone(), Some(axis)).map_err(wrap("spine"))?;
    for smp in samples.iter_mut() {
        smp.a = with_axis.a_at(pair, strip, smp.u);
    }
    let spine = Spine::sampled(strip, o, samples, Some(axis)).map_err(wrap("spine"))?;

    let region = match kind {
        FissureKind::SW | FissureKind::NW => RegionDescriptor::new(kind.region_kind(), v, saddle.location.x1),
        FissureKind::SE | FissureKind::NE => RegionDescriptor::new(kind.region_kind(), saddle.location.x1, v),
    }
    .map_err(wrap("exit-order"))?;
    let layout = FissureLayout {
        orientation: kind,
        u0,
        saddle_u: saddle.location.x1,
        v,
        spine,
        region,
        node_slope,
        saddle_slope,
    };
    check_layout(pair, strip, &layout)?;
    Ok(layout)
}

struct Ctx<'a> {
    pair: &'a BoundaryPair,
    strip: &'a Strip,
    state: &'a VectorFieldState,
    saddle: &'a StationaryPoint,
    saddle_slope: f64,
    node: &'a StationaryPoint,
    first: &'a IntegralCurve,
    u_axis: f64,
    /// Sign of T′ through the axis.
    s: f64,
}

struct Trial {
    /// (u, T, T′) in strip coordinates.
    samples: Vec<(f64, f64, f64)>,
    v: f64,
    node_slope: f64,
    /// A carried across the axis by the transversality relation minus the
    /// closed form on the far side.
    mismatch: f64,
    scale: f64,
}

impl Ctx<'_> {
    fn crossings(&self, sp: &Spine, level: f64) -> (f64, f64) {
        let (ua, ub) = sp.u_range();
        let tol = 1e-14 * (1.0 + self.strip.epsilon);
        let lo = bisect(|u| sp.t_at(u) + self.s * level, ua, self.u_axis, tol);
        let hi = bisect(|u| sp.t_at(u) - self.s * level, self.u_axis, ub, tol);
        (lo, hi)
    }

    fn trial(&self, k: f64, heading: f64) -> Result<Trial> {
        let e = self.strip.epsilon;
        let o = self.state.orientation;
        let sig = o.sigma();
        let saddle = self.saddle;
        let node = self.node.location;
        let n = heading * 1.0_f64.hypot(k);
        let mut second = continue_from_node(self.state, node, (heading / n.abs(), heading * k / n.abs()))
            .map_err(wrap("continuation"))?;
        let exit = *second.samples.last().unwrap();
        if (exit.x2 + saddle.location.x2).abs() > 1e-6 * e {
            return Err(failure(
                "exit",
                format!("continuation ended at x₂ = {} instead of the opposite boundary", exit.x2),
            ));
        }
        // Snap the localized exit onto the boundary.
        second.samples.last_mut().unwrap().x2 = -saddle.location.x2;

        // Field points in travel order: saddle, curve to the node, node, onwards.
        let mut path: Vec<(Point, Option<f64>)> = vec![(saddle.location, Some(self.saddle_slope))];
        path.extend(self.first.samples.iter().skip(1).map(|p| (*p, None)));
        path.push((node, Some(k)));
        path.extend(second.samples.iter().map(|p| (*p, None)));

        let mut raw: Vec<(f64, f64, f64)> = Vec::with_capacity(path.len());
        for (p, fixed) in path {
            let tp = match fixed {
                Some(s) => s,
                None => {
                    let (a, b) = field(self.state, p);
                    if a == 0.0 {
                        return Err(failure("slope", format!("vertical field at ({}, {})", p.x1, p.x2)));
                    }
                    b / a
                }
            };
            raw.push((p.x1 + sig * e, p.x2, tp));
        }
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut pts: Vec<(f64, f64, f64)> = Vec::with_capacity(raw.len());
        for r in raw {
            if let Some(last) = pts.last() {
                if r.0 - last.0 <= 1e-12 * e {
                    // Keep exact endpoints (saddle, node) over integrator samples.
                    if r.1 == 0.0 || r.1.abs() == e {
                        pts.pop();
                    } else {
                        continue;
                    }
                }
            }
            pts.push(r);
        }
        for w in pts.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(failure("monotone", "spine abscissae do not increase"));
            }
        }

        // Near the star node the direction field is ill-conditioned, so T′ there
        // comes from a least-squares fit of the resolved slopes on both sides.
        let node_slope = fit_node_slope(&mut pts, self.u_axis, e).unwrap_or(k);
        let samples: Vec<SpineSample> =
            pts.iter().map(|&(u, t, tp)| SpineSample { u, t, a: f64::NAN, t_prime: tp }).collect();
        let sp = Spine::sampled(self.strip, o, samples, None).map_err(wrap("spine"))?;
        let (ua, ub) = self.crossings(&sp, MATCH_LEVEL * e);
        let rhs = |u: f64, a: f64| {
            let (t, tp) = sp.t_and_slope(u);
            0.5 * transversality_rhs(self.pair, e, o, u, t, tp, a)
        };
        let a_start = a_from_t(self.pair, self.strip, o, ua, sp.t_at(ua)).map_err(wrap("axis"))?;
        let a_end = a_from_t(self.pair, self.strip, o, ub, sp.t_at(ub)).map_err(wrap("axis"))?;
        let a = carry(ua, a_start, ub, 4000, rhs);
        Ok(Trial {
            samples: pts,
            v: exit.x1,
            node_slope,
            mismatch: a - a_end,
            scale: 1.0_f64.max(a_end.abs()),
        })
    }
}

/// Classical RK4 for A′ = rhs(u, A) from (u0, a0) to u1.
fn carry(u0: f64, a0: f64, u1: f64, steps: usize, rhs: impl Fn(f64, f64) -> f64) -> f64 {
    let h = (u1 - u0) / steps as f64;
    let (mut u, mut a) = (u0, a0);
    for _ in 0..steps {
        let k1 = rhs(u, a);
        let k2 = rhs(u + 0.5 * h, a + 0.5 * h * k1);
        let k3 = rhs(u + 0.5 * h, a + 0.5 * h * k2);
        let k4 = rhs(u + h, a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += h;
    }
    a
}

/// |T|/ε at which A is matched across the axis.
const MATCH_LEVEL: f64 = 0.05;

/// Fit T(u) = τ·P(τ), τ = u − u_axis, with P cubic, on 1e−3·ε ≤ |τ| ≤ 0.2·ε.
/// Replaces T′ inside the inner gap by the fitted derivative and returns the
/// slope P(0) of the computed curve at the axis.
fn fit_node_slope(pts: &mut [(f64, f64, f64)], u_axis: f64, e: f64) -> Option<f64> {
    let (r_in, r_out) = (1e-3 * e, 0.2 * e);
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    let (mut left, mut right) = (0, 0);
    for &(u, t, _) in pts.iter() {
        let d = u - u_axis;
        if d.abs() < r_in || d.abs() > r_out {
            continue;
        }
        if d < 0.0 { left += 1 } else { right += 1 }
        let z = d / r_out;
        let row = [1.0, z, z * z, z * z * z];
        let y = t / d;
        for i in 0..4 {
            atb[i] += row[i] * y;
            for j in 0..4 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    if left < 3 || right < 3 {
        return None;
    }
    let c = solve4(ata, atb)?;
    // T′ = P + τP′ = c0 + 2c1 z + 3c2 z² + 4c3 z³.
    let slope = |d: f64| {
        let z = d / r_out;
        c[0] + z * (2.0 * c[1] + z * (3.0 * c[2] + z * 4.0 * c[3]))
    };
    for p in pts.iter_mut() {
        let d = p.0 - u_axis;
        if d.abs() < r_in {
            p.2 = slope(d);
        }
    }
    Some(c[0])
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for k in 0..4 {
        let piv = (k..4).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
        if a[piv][k].abs() < 1e-300 {
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

/// Endpoint identities, exit ordering, slope bounds and D± signs.
pub fn check_layout(pair: &BoundaryPair, strip: &Strip, l: &FissureLayout) -> Result<()> {
    let e = strip.epsilon;
    let kind = l.orientation;
    let o = kind.orientation();
    let sp = &l.spine;
    let t_node = sp.t_at(l.strip_u(l.u0, e));
    if t_node.abs() > 1e-6 {
        return Err(failure("endpoint", format!("T at the node is {t_node}")));
    }
    let t_end = match kind.saddle_side() {
        SaddleSide::Upper => e,
        SaddleSide::Lower => -e,
    };
    let t_sad = sp.t_at(l.strip_u(l.saddle_u, e));
    if (t_sad - t_end).abs() > 1e-6 {
        return Err(failure("endpoint", format!("T at the saddle is {t_sad}, expected {t_end}")));
    }
    let exit_ok = match o {
        Orientation::Left => l.v < l.u0 - e,
        Orientation::Right => l.v > l.u0 + e,
    };
    if !exit_ok {
        return Err(failure("exit-order", format!("exit v = {} on the wrong side of u₀ ∓ ε", l.v)));
    }
    let s = kind.slope_sign();
    let n = sp.samples.len();
    for smp in &sp.samples[1..n - 1] {
        let t = s * smp.t_prime;
        if !(t > -1e-9 && t < 1.0 + 1e-9) {
            return Err(failure("slope", format!("T′ = {} at u = {}", smp.t_prime, smp.u)));
        }
    }
    for smp in &sp.samples {
        if smp.t.abs() < AXIS_SINGULAR * e {
            continue;
        }
        let (dp, dm) = d_orient(pair, strip, o, smp.u, smp.t).map_err(wrap("concavity"))?;
        let (tp, tm) = crate::herringbone::spine_args(o, e, smp.u, smp.t);
        let scale = 1.0_f64.max(pair.fp(tp, 2).abs()).max(pair.fm(tm, 2).abs());
        if dp.min(dm) < -1e-9 * scale {
            return Err(failure(
                "concavity",
                format!("D = ({dp}, {dm}) at u = {}, T = {}", smp.u, smp.t),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlankMargins {
    pub delta_outer: f64,
    pub delta_inner: f64,
}

/// Largest multiple of `step` (up to `cap`) for which `cond` holds at every
/// step point going from `seam` in direction `dir`.
fn scan_margin<F: Fn(f64) -> bool>(cond: F, seam: f64, dir: f64, step: f64, cap: f64) -> f64 {
    let n = (cap / step).round() as usize;
    let mut ok = 0;
    for j in 1..=n {
        if cond(seam + dir * j as f64 * step) {
            ok = j;
        } else {
            break;
        }
    }
    ok as f64 * step
}

/// Widths of the simple foliations that can be attached on both sides of a
/// fissure: `delta_outer` at the saddle seam, `delta_inner` at the exit seam.
pub fn flank_margins(layout: &FissureLayout, pair: &BoundaryPair, strip: &Strip) -> Result<FlankMargins> {
    let e = strip.epsilon;
    let step = e / 64.0;
    let cap = 10.0 * e;
    let r = |u: f64| right_condition(pair, strip, u);
    let l = |u: f64| left_condition(pair, strip, u);
    let (su, v) = (layout.saddle_u, layout.v);
    let (outer, inner) = match layout.orientation {
        FissureKind::SW => (scan_margin(r, su, 1.0, step, cap), scan_margin(l, v, -1.0, step, cap)),
        FissureKind::SE => (scan_margin(l, su, -1.0, step, cap), scan_margin(r, v, 1.0, step, cap)),
        FissureKind::NW => (scan_margin(l, su, 1.0, step, cap), scan_margin(r, v, -1.0, step, cap)),
        FissureKind::NE => (scan_margin(r, su, -1.0, step, cap), scan_margin(l, v, 1.0, step, cap)),
    };
    if outer == 0.0 || inner == 0.0 {
        return Err(Error::FlankFailure(format!(
            "{:?} fissure at u₀ = {}: margins outer {outer}, inner {inner}",
            layout.orientation, layout.u0
        )));
    }
    Ok(FlankMargins { delta_outer: outer, delta_inner: inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herringbone::{herringbone_eval, local_data, verify_spine};

    fn pair(p: &[f64], m: &[f64]) -> BoundaryPair {
        BoundaryPair::from_coefficients(p, m).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(classify_fissure(&pair(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]), 0.0).unwrap(), FissureKind::SW);
        assert_eq!(classify_fissure(&pair(&[0.0, 0.0, 0.0, -1.0], &[0.0, 0.0, 1.0, -1.0]), 0.0).unwrap(), FissureKind::NE);
        assert!(matches!(
            classify_fissure(&pair(&[0.0, 0.0, 1.0], &[0.0, 2.0]), 1.0),
            Err(Error::UnsupportedDegenerate(_))
        ));
        assert_eq!(classify_fissure(&pair(&[0.0, 0.0, 1.0, -1.0], &[0.0, 0.0, 0.0, -1.0]), 0.0).unwrap(), FissureKind::SE);
        assert_eq!(classify_fissure(&pair(&[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]), 0.0).unwrap(), FissureKind::NW);
    }

    #[test]
    fn sw_cubic() {
        let p = pair(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]);
        let s = Strip::new(0.1).unwrap();
        let l = build_fissure(&p, &s, 0.0).unwrap();
        assert_eq!(l.orientation, FissureKind::SW);
        assert!((l.saddle_u - 0.16).abs() < 1e-12);
        assert!(l.spine.t_at(0.1).abs() < 1e-6);
        assert!((l.spine.t_at(0.26) - 0.1).abs() < 1e-6);
        assert!(l.v < -0.1);
        assert!(l.node_slope > 0.0 && l.node_slope < 1.0 - 1e-3);
        let rep = verify_spine(&p, &s, &l.spine).unwrap();
        assert!(rep.d_min >= -1e-9 && rep.slope_ok, "{rep:?}");
        assert!(rep.passes(), "{rep:?}");
        let m = flank_margins(&l, &p, &s).unwrap();
        assert!(m.delta_outer > 0.0 && m.delta_inner > 0.0);
        // Boundary values are reproduced by the ribs.
        for x1 in [0.0, 0.05, 0.1] {
            let b = herringbone_eval(&p, &s, &l.spine, Point::new(x1, 0.1)).unwrap();
            assert!((b - p.fp(x1, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn ne_is_point_reflection_of_sw() {
        let s = Strip::new(0.1).unwrap();
        let sw = build_fissure(&pair(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]), &s, 0.0).unwrap();
        let q = pair(&[0.0, 0.0, 0.0, -1.0], &[0.0, 0.0, 1.0, -1.0]);
        let ne = build_fissure(&q, &s, 0.0).unwrap();
        assert_eq!(ne.orientation, FissureKind::NE);
        assert!((ne.saddle_u + sw.saddle_u).abs() < 1e-12 && (ne.v + sw.v).abs() < 1e-8);
        let (a, b) = ne.spine.u_range();
        for i in 1..50 {
            let u = a + (b - a) * i as f64 / 50.0;
            assert!((ne.spine.t_at(u) + sw.spine.t_at(-u)).abs() < 1e-8, "T at {u}");
            assert!((ne.spine.a_at(&q, &s, u) - sw.spine.a_at(&p_sw(), &s, -u)).abs() < 1e-8, "A at {u}");
        }
    }

    fn p_sw() -> BoundaryPair {
        pair(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn sw_concavity_gap_positive() {
        let p = p_sw();
        let s = Strip::new(0.1).unwrap();
        let l = build_fissure(&p, &s, 0.0).unwrap();
        let mut gap = f64::INFINITY;
        for smp in &l.spine.samples {
            if smp.t.abs() < 1e-6 * s.epsilon || s.epsilon - smp.t.abs() < 1e-6 * s.epsilon {
                continue;
            }
            let ld = local_data(&p, &s, Orientation::Left, smp.u, smp.t, smp.a).unwrap();
            gap = gap.min(ld.d_minus - ld.d_plus);
        }
        assert!(gap > 0.0, "{gap}");
    }

    #[test]
    fn axis_limit_matches_closed_form_nearby() {
        let p = p_sw();
        let s = Strip::new(0.1).unwrap();
        let l = build_fissure(&p, &s, 0.0).unwrap();
        let ax = l.spine.axis.unwrap();
        for t in [-1e-4, 1e-4] {
            let u = bisect(|u| l.spine.t_at(u) - t, ax.u_lo, ax.u_hi, 1e-15);
            let a = a_from_t(&p, &s, Orientation::Left, u, t).unwrap();
            assert!((a - l.spine.a_at(&p, &s, u)).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn large_epsilon_fails() {
        let p = pair(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            build_fissure(&p, &Strip::new(10.0).unwrap(), 0.0),
            Err(Error::FissureBuildFailure { .. })
        ));
    }

    #[test]
    fn fake_layout_has_no_flank() {
        let p = pair(&[0.0, 0.0, 1.0], &[0.0, 2.0]);
        let s = Strip::new(0.25).unwrap();
        let smp = |u: f64| SpineSample { u, t: 0.1, a: 0.0, t_prime: 0.0 };
        let spine = Spine::sampled(&s, Orientation::Left, vec![smp(0.0), smp(0.5), smp(1.0)], None).unwrap();
        let fake = FissureLayout {
            orientation: FissureKind::SW,
            u0: 1.0,
            saddle_u: 0.5,
            v: 0.5,
            spine,
            region: RegionDescriptor::new(RegionKind::SW, 0.5, 0.5).unwrap(),
            node_slope: 0.5,
            saddle_slope: 0.5,
        };
        assert!(matches!(flank_margins(&fake, &p, &s), Err(Error::FlankFailure(_))));
    }
}
