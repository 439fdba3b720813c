//! Independent checks: the grid-minimal diagonally concave function obtained
//! by alternating least-concave-majorant sweeps, and a split-tree simulator
//! that follows the candidate's extremal segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{build_candidate, CandidateSurface, Evaluator};
use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};
use crate::foliation::{left_candidate_eval, left_condition, right_candidate_eval, right_condition};
use crate::geometry::{Point, Strip};
use crate::herringbone::{locate, Spine};
use crate::numeric::compensated_sum;

pub const DEFAULT_TOL_CONVERGE: f64 = 1e-11;
pub const DEFAULT_SWEEP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgePolicy {
    ClampToCandidate,
    ClampToSimpleFoliation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: f64,
    pub x1_range: (f64, f64),
    /// Relative to the boundary scale.
    pub tol_converge: f64,
    /// Maximum number of family passes.
    pub sweep_cap: usize,
}

impl GridConfig {
    pub fn new(h: f64, x1_range: (f64, f64)) -> Self {
        Self { h, x1_range, tol_converge: DEFAULT_TOL_CONVERGE, sweep_cap: DEFAULT_SWEEP_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub h: f64,
    pub x1_range: (f64, f64),
    /// Half-height in nodes: m·h = ε.
    pub m: usize,
    /// Columns are 0..=n1.
    pub n1: usize,
    /// Row-major in x₂: index j·(n1 + 1) + i.
    pub values: Vec<f64>,
    pub boundary_mask: Vec<bool>,
    pub scale: f64,
    pub passes: usize,
    pub residual: f64,
    /// Smallest pointwise change seen in any pass.
    pub min_change: f64,
    /// (pass index, max pointwise change).
    pub log: Vec<(usize, f64)>,
}

fn integer_ratio(a: f64, h: f64, what: &str) -> Result<usize> {
    let r = a / h;
    let n = r.round();
    if !(n >= 1.0) || (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::invalid(format!("{what} = {a} is not an integer multiple of h = {h}")));
    }
    Ok(n as usize)
}

impl OracleGrid {
    pub fn width(&self) -> usize {
        self.n1 + 1
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.width() + i
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        let e = self.m as f64 * self.h;
        Point::new(self.x1_range.0 + i as f64 * self.h, -e + j as f64 * self.h)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    /// Column of x₁ if it is a grid abscissa.
    pub fn column_of(&self, x1: f64) -> Option<usize> {
        let r = (x1 - self.x1_range.0) / self.h;
        let n = r.round();
        ((r - n).abs() < 1e-7 && n >= 0.0 && n <= self.n1 as f64).then_some(n as usize)
    }

    /// Largest amount by which a node falls below the midpoint of its two
    /// diagonal neighbours.
    pub fn concavity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..2 * self.m {
            for i in 1..self.n1 {
                let v = self.value(i, j);
                let r = 0.5 * (self.value(i - 1, j - 1) + self.value(i + 1, j + 1)) - v;
                let l = 0.5 * (self.value(i - 1, j + 1) + self.value(i + 1, j - 1)) - v;
                worst = worst.max(r).max(l);
            }
        }
        worst
    }

    pub fn monotone(&self) -> bool {
        self.min_change >= -1e-14 * self.scale
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,value\n");
        for j in 0..=2 * self.m {
            for i in 0..=self.n1 {
                let p = self.node(i, j);
                s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.x1, p.x2, self.value(i, j)));
            }
        }
        s
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("pass,residual\n");
        for (k, r) in &self.log {
            s.push_str(&format!("{k},{r:.16e}\n"));
        }
        s
    }
}

/// Nodes (i, j) of one diagonal line in increasing j.
fn line_nodes(right: bool, c: i64, n1: i64, top: i64) -> Vec<(usize, usize)> {
    let (j0, j1) = if right { ((-c).max(0), top.min(n1 - c)) } else { ((c - n1).max(0), top.min(c)) };
    (j0..=j1).map(|j| ((if right { c + j } else { c - j }) as usize, j as usize)).collect()
}

/// Least concave majorant at equally spaced abscissae.
fn concave_majorant(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b when it lies on or below the chord a–k.
            let lhs = (v[b] - v[a]) * (k - a) as f64;
            let rhs = (v[k] - v[a]) * (b - a) as f64;
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut out = vec![0.0; n];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        out[a] = v[a];
        for k in a + 1..b {
            let s = (k - a) as f64 / (b - a) as f64;
            out[k] = v[a] + s * (v[b] - v[a]);
        }
    }
    out[n - 1] = v[n - 1];
    out
}

pub fn compute_minimal(
    pair: &BoundaryPair,
    strip: &Strip,
    cfg: &GridConfig,
    policy: EdgePolicy,
) -> Result<OracleGrid> {
    let h = cfg.h;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("grid step {h} must be positive")));
    }
    let e = strip.epsilon;
    let m = integer_ratio(e, h, "ε")?;
    let (a, b) = cfg.x1_range;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid(format!("x1 range [{a}, {b}] must be finite and ordered")));
    }
    let n1 = integer_ratio(b - a, h, "range width")?;
    let scale = pair.value_scale(a, b);
    let big = 10.0 * scale;

    let candidate = match policy {
        EdgePolicy::ClampToCandidate => Some(build_candidate(pair, strip, (a, b))?),
        EdgePolicy::ClampToSimpleFoliation => None,
    };
    let edge_value = |p: Point| -> Result<f64> {
        match &candidate {
            Some(c) => c.evaluate(p),
            None => {
                let u = p.x1;
                if right_condition(pair, strip, u - p.x2) {
                    right_candidate_eval(pair, strip, p)
                } else if left_condition(pair, strip, u + p.x2) {
                    left_candidate_eval(pair, strip, p)
                } else {
                    Err(Error::UnsupportedConfiguration(format!("no simple foliation at the grid edge x₁ = {u}")))
                }
            }
        }
    };

    let mut g = OracleGrid {
        h,
        x1_range: (a, a + n1 as f64 * h),
        m,
        n1,
        values: vec![-big; (n1 + 1) * (2 * m + 1)],
        boundary_mask: vec![false; (n1 + 1) * (2 * m + 1)],
        scale,
        passes: 0,
        residual: f64::INFINITY,
        min_change: 0.0,
        log: Vec::new(),
    };
    let top = 2 * m;
    for i in 0..=n1 {
        let x1 = g.node(i, 0).x1;
        let (lo, hi) = (g.idx(i, 0), g.idx(i, top));
        g.values[lo] = pair.fm(x1, 0);
        g.values[hi] = pair.fp(x1, 0);
        g.boundary_mask[lo] = true;
        g.boundary_mask[hi] = true;
    }
    for j in 1..top {
        for i in [0, n1] {
            let k = g.idx(i, j);
            g.values[k] = edge_value(g.node(i, j))?;
            g.boundary_mask[k] = true;
        }
    }

    let (n1i, topi) = (n1 as i64, top as i64);
    let right_lines: Vec<Vec<(usize, usize)>> =
        (-topi..=n1i).map(|c| line_nodes(true, c, n1i, topi)).filter(|l| l.len() > 2).collect();
    let left_lines: Vec<Vec<(usize, usize)>> =
        (0..=n1i + topi).map(|c| line_nodes(false, c, n1i, topi)).filter(|l| l.len() > 2).collect();
    let tol = cfg.tol_converge * scale;
    let width = n1 + 1;
    let mut quiet = 0;
    for pass in 0..cfg.sweep_cap {
        let lines = if pass % 2 == 0 { &right_lines } else { &left_lines };
        let vals = &g.values;
        let updates: Vec<Vec<f64>> = lines
            .par_iter()
            .map(|line| concave_majorant(&line.iter().map(|&(i, j)| vals[j * width + i]).collect::<Vec<_>>()))
            .collect();
        let (mut change, mut min_change): (f64, f64) = (0.0, 0.0);
        for (line, new) in lines.iter().zip(updates) {
            for (&(i, j), v) in line.iter().zip(new).skip(1) {
                let k = j * width + i;
                if g.boundary_mask[k] {
                    continue;
                }
                let d = v - g.values[k];
                change = change.max(d.abs());
                min_change = min_change.min(d);
                g.values[k] = v;
            }
        }
        g.passes = pass + 1;
        g.min_change = g.min_change.min(min_change);
        g.residual = change;
        quiet = if change <= tol { quiet + 1 } else { 0 };
        // Both families must be stable before stopping.
        if quiet >= 2 {
            g.log.push((pass + 1, change));
            return Ok(g);
        }
        if pass % 16 == 0 {
            g.log.push((pass + 1, change));
        }
    }
    Err(Error::ConvergenceFailure { sweeps: g.passes, residual: g.residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub max_abs_diff: f64,
    pub argmax: Point,
    /// Extremes of candidate − oracle.
    pub signed_min: f64,
    pub signed_max: f64,
    pub nodes: usize,
}

/// Statistics of candidate − oracle over the grid nodes with x₁ in the window.
pub fn compare(candidate: &CandidateSurface, oracle: &OracleGrid, inner: (f64, f64)) -> Result<Comparison> {
    let mut out = Comparison {
        max_abs_diff: 0.0,
        argmax: Point::new(f64::NAN, f64::NAN),
        signed_min: f64::INFINITY,
        signed_max: f64::NEG_INFINITY,
        nodes: 0,
    };
    for j in 0..=2 * oracle.m {
        for i in 0..=oracle.n1 {
            let p = oracle.node(i, j);
            if p.x1 < inner.0 - 1e-12 || p.x1 > inner.1 + 1e-12 {
                continue;
            }
            let d = candidate.evaluate(p)? - oracle.value(i, j);
            out.nodes += 1;
            out.signed_min = out.signed_min.min(d);
            out.signed_max = out.signed_max.max(d);
            if d.abs() > out.max_abs_diff || out.argmax.x1.is_nan() {
                out.max_abs_diff = d.abs();
                out.argmax = p;
            }
        }
    }
    if out.nodes == 0 {
        return Err(Error::invalid("inner window contains no grid node"));
    }
    Ok(out)
}

/// Largest change at shared nodes between two grids with the same step.
pub fn grid_difference(a: &OracleGrid, b: &OracleGrid, inner: (f64, f64)) -> Result<f64> {
    if a.m != b.m || (a.h - b.h).abs() > 1e-15 * a.h {
        return Err(Error::invalid("grids differ in step or height"));
    }
    let mut worst: f64 = 0.0;
    let mut shared = 0;
    for i in 0..=a.n1 {
        let x1 = a.node(i, 0).x1;
        if x1 < inner.0 - 1e-12 || x1 > inner.1 + 1e-12 {
            continue;
        }
        let Some(k) = b.column_of(x1) else { continue };
        for j in 0..=2 * a.m {
            worst = worst.max((a.value(i, j) - b.value(k, j)).abs());
            shared += 1;
        }
    }
    if shared == 0 {
        return Err(Error::invalid("no shared nodes in the inner window"));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Split trees

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub point: Point,
    pub weight: f64,
    pub children: Option<(usize, usize)>,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTree {
    pub nodes: Vec<SplitNode>,
}

impl SplitTree {
    /// Largest |w₁p₁ + w₂p₂ − w·p| / w over the splits, and the largest
    /// |w₁ + w₂ − w| / w.
    pub fn martingale_defects(&self) -> (f64, f64) {
        let (mut bary, mut mass): (f64, f64) = (0.0, 0.0);
        for n in &self.nodes {
            if let Some((a, b)) = n.children {
                let (ca, cb) = (&self.nodes[a], &self.nodes[b]);
                let w = ca.weight + cb.weight;
                mass = mass.max((w - n.weight).abs() / n.weight);
                let x1 = (ca.weight * ca.point.x1 + cb.weight * cb.point.x1) / n.weight - n.point.x1;
                let x2 = (ca.weight * ca.point.x2 + cb.weight * cb.point.x2) / n.weight - n.point.x2;
                bary = bary.max(x1.abs().max(x2.abs()) / (1.0 + n.point.x1.abs().max(n.point.x2.abs())));
            }
        }
        (bary, mass)
    }

    /// Boundary leaf mass plus unsplit interior mass.
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.nodes.iter().filter(|n| n.children.is_none()).map(|n| n.weight))
    }

    /// Both children of every split lie on one diagonal through the parent,
    /// on opposite sides.
    pub fn splits_are_diagonal(&self) -> bool {
        self.nodes.iter().all(|n| match n.children {
            None => true,
            Some((a, b)) => {
                let (p, q) = (self.nodes[a].point, self.nodes[b].point);
                let (d1, d2) = ((p.x1 - n.point.x1, p.x2 - n.point.x2), (q.x1 - n.point.x1, q.x2 - n.point.x2));
                let diag = |d: (f64, f64)| (d.0.abs() - d.1.abs()).abs() <= 1e-12 * (1.0 + d.0.abs());
                diag(d1) && diag(d2) && d1.0 * d2.0 < 0.0 && d1.1 * d2.1 < 0.0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub lower_bound: f64,
    pub residual_mass: f64,
    /// Σ weight · B over the unsplit interior nodes.
    pub residual_value: f64,
    pub depth_used: usize,
    /// max |f±| over the x₁-span of the tree widened by ε.
    pub local_max_f: f64,
    pub tree: SplitTree,
}

fn local_max_f(c: &CandidateSurface, nodes: &[SplitNode]) -> f64 {
    let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), n| (a.min(n.point.x1), b.max(n.point.x1)));
    let e = c.strip.epsilon;
    c.pair.value_scale(lo - e, hi + e)
}

/// Default step off the spine, as a fraction of ε.
pub const DEFAULT_SPINE_STEP: f64 = 1.0 / 8192.0;

/// Pending interior node: index and, for spine points, the family of the rib
/// it was reached along.
#[derive(Clone, Copy)]
struct Pending {
    node: usize,
    spine: Option<SpineVisit>,
}

#[derive(Clone, Copy)]
struct SpineVisit {
    region: usize,
    via_upper: bool,
}

fn on_boundary(e: f64, p: Point) -> bool {
    (p.x2.abs() - e).abs() <= 1e-13 * (1.0 + e)
}

pub fn simulate_extremal(c: &CandidateSurface, p: Point, depth: usize, tol: f64) -> Result<Simulation> {
    simulate_extremal_with(c, p, depth, tol, DEFAULT_SPINE_STEP * c.strip.epsilon)
}

/// Follow the candidate's extremal segments from p. Stops at `depth` levels
/// or once the interior mass is at most `tol`.
pub fn simulate_extremal_with(
    c: &CandidateSurface,
    p: Point,
    depth: usize,
    tol: f64,
    spine_step: f64,
) -> Result<Simulation> {
    c.strip.check(p)?;
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    if !(spine_step > 0.0) {
        return Err(Error::invalid("spine step must be positive"));
    }
    let e = c.strip.epsilon;
    let mut nodes = vec![SplitNode { point: p, weight: 1.0, children: None, on_boundary: on_boundary(e, p) }];
    let mut lower = 0.0;
    if nodes[0].on_boundary {
        lower = boundary_value(c, p);
        let local_max_f = local_max_f(c, &nodes);
        return Ok(Simulation {
            lower_bound: lower,
            residual_mass: 0.0,
            residual_value: 0.0,
            depth_used: 0,
            local_max_f,
            tree: SplitTree { nodes },
        });
    }
    let mut frontier = vec![Pending { node: 0, spine: None }];
    let mut level = 0;
    let mut best_mass = 1.0_f64;
    let mut since_progress = 0usize;
    while level < depth && !frontier.is_empty() {
        let mass: f64 = frontier.iter().map(|f| nodes[f.node].weight).sum();
        if mass <= tol {
            break;
        }
        level += 1;
        let mut next = Vec::new();
        for f in frontier {
            let parent = nodes[f.node];
            let (children, tags) = split(c, parent.point, f.spine, spine_step)?;
            let (ta, tb) = children;
            // Weights from the barycentric position of the parent.
            let da = parent.point.dist(ta);
            let db = parent.point.dist(tb);
            // The lighter child by ratio, the heavier by difference, so that
            // rounding does not drain mass over many levels.
            let (wa, wb) = if db <= da {
                let wa = parent.weight * db / (da + db);
                (wa, parent.weight - wa)
            } else {
                let wb = parent.weight * da / (da + db);
                (parent.weight - wb, wb)
            };
            let ia = nodes.len();
            for (q, w) in [(ta, wa), (tb, wb)] {
                nodes.push(SplitNode { point: q, weight: w, children: None, on_boundary: on_boundary(e, q) });
            }
            nodes[f.node].children = Some((ia, ia + 1));
            for (k, tag) in [(ia, tags.0), (ia + 1, tags.1)] {
                if nodes[k].on_boundary {
                    lower += nodes[k].weight * boundary_value(c, nodes[k].point);
                } else {
                    next.push(Pending { node: k, spine: tag });
                }
            }
        }
        frontier = next;
        let mass: f64 = frontier.iter().map(|f| nodes[f.node].weight).sum();
        if mass < best_mass * (1.0 - 1e-12) {
            best_mass = mass;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress > 1000 {
                return Err(Error::SimulationStall(format!("interior mass stuck at {mass} after {level} levels")));
            }
        }
    }
    let residual_mass = compensated_sum(frontier.iter().map(|f| nodes[f.node].weight)) + 0.0;
    let mut residual_value = 0.0;
    for f in &frontier {
        residual_value += nodes[f.node].weight * c.evaluate(nodes[f.node].point)?;
    }
    let local_max_f = local_max_f(c, &nodes);
    Ok(Simulation { lower_bound: lower, residual_mass, residual_value, depth_used: level, local_max_f, tree: SplitTree { nodes } })
}

fn boundary_value(c: &CandidateSurface, p: Point) -> f64 {
    if p.x2 > 0.0 {
        c.pair.fp(p.x1, 0)
    } else {
        c.pair.fm(p.x1, 0)
    }
}

type Children = ((Point, Point), (Option<SpineVisit>, Option<SpineVisit>));

/// Furthest point from p along direction d (x₂-component ±1) that stays in
/// region `i` and in the strip.
fn reach(c: &CandidateSurface, i: usize, p: Point, d: (f64, f64)) -> Point {
    let e = c.strip.epsilon;
    let mut t = if d.1 > 0.0 { e - p.x2 } else { e + p.x2 };
    // Left seam: side must stay ≥ 0; right seam: side must stay ≤ 0.
    let mut limit = |s: &crate::assembly::Seam, keep_positive: bool| {
        let rate = s.family.index_of(Point::new(d.0, d.1));
        let side = s.side(p);
        if rate != 0.0 {
            let hit = -side / rate;
            let leaving = if keep_positive { rate < 0.0 } else { rate > 0.0 };
            if leaving && hit >= 0.0 && hit < t {
                t = hit;
            }
        }
    };
    if i > 0 {
        limit(&c.seams[i - 1], true);
    }
    if i < c.seams.len() {
        limit(&c.seams[i], false);
    }
    Point::new(p.x1 + t * d.0, p.x2 + t * d.1)
}

/// Point of the diagonal through p with direction (d₁, 1) at height x₂.
fn along(p: Point, d: (f64, f64), x2: f64) -> Point {
    Point::new(p.x1 + (x2 - p.x2) * d.0, x2)
}

fn spine_of(c: &CandidateSurface, i: usize) -> Option<&Spine> {
    match &c.plan[i].evaluator {
        Evaluator::HerringboneInfinite { spine } => Some(spine),
        Evaluator::Fissure { layout } => Some(&layout.spine),
        _ => None,
    }
}

fn split(c: &CandidateSurface, p: Point, visit: Option<SpineVisit>, step: f64) -> Result<Children> {
    let e = c.strip.epsilon;
    if let Some(v) = visit {
        let spine = spine_of(c, v.region).expect("spine visit outside a herringbone");
        let s = spine.orientation.sigma();
        // Leave along the rib family not used to arrive: its boundary end is
        // one child, a short step past the spine the other.
        let dir = if v.via_upper { (s, 1.0) } else { (-s, 1.0) };
        let toward = if v.via_upper { -e } else { e };
        let end = along(p, dir, toward);
        let room = if v.via_upper { e - p.x2 } else { e + p.x2 };
        let q = along(p, dir, p.x2 - toward.signum() * step.min(0.5 * room));
        return Ok(((end, q), (None, None)));
    }
    let i = c.owner(p);
    match &c.plan[i].evaluator {
        Evaluator::SimpleR => {
            let (a, b) = (reach(c, i, p, (1.0, 1.0)), reach(c, i, p, (-1.0, -1.0)));
            Ok(((a, b), (None, None)))
        }
        Evaluator::LinearPatch { .. } | Evaluator::Triangle(_) => {
            // Linear along both diagonals; a point on an edge needs the one
            // running along it.
            let r = (reach(c, i, p, (1.0, 1.0)), reach(c, i, p, (-1.0, -1.0)));
            let l = (reach(c, i, p, (-1.0, 1.0)), reach(c, i, p, (1.0, -1.0)));
            let short = |(a, b): (Point, Point)| p.dist(a).min(p.dist(b));
            Ok((if short(l) > short(r) { l } else { r }, (None, None)))
        }
        Evaluator::SimpleL => {
            let (a, b) = (reach(c, i, p, (-1.0, 1.0)), reach(c, i, p, (1.0, -1.0)));
            Ok(((a, b), (None, None)))
        }
        Evaluator::HerringboneInfinite { .. } | Evaluator::Fissure { .. } => {
            let spine = spine_of(c, i).expect("herringbone evaluator");
            let loc = locate(&c.pair, &c.strip, spine, p)?;
            // Children on the exact rib line through p; locate only brackets it.
            let s = spine.orientation.sigma();
            let dir = if loc.upper { (-s, 1.0) } else { (s, 1.0) };
            let sp = along(p, dir, loc.t);
            let end = along(p, dir, if loc.upper { e } else { -e });
            let visit = SpineVisit { region: i, via_upper: loc.upper };
            if p.dist(sp) <= 1e-12 * (1.0 + e) {
                return split(c, p, Some(visit), step);
            }
            let tag = if on_boundary(e, sp) { None } else { Some(visit) };
            Ok(((end, sp), (None, tag)))
        }
    }
}
