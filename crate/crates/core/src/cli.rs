//! Config-driven front end: one JSON config in, CSV and JSON artifacts out.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assembly::{
    build_candidate, surface_grid, verify_candidate, CandidateSurface, Sampling, BOUNDARY_TOL, COEFF_TOL,
    CONCAVITY_TOL, SEAM_C1_TOL,
};
use crate::boundary::{derivative_difference_roots, BoundaryPair};
use crate::error::Error;
use crate::fissure::build_fissure;
use crate::geometry::{Point, Strip};
use crate::herringbone::{Orientation, AXIS_BAND, TRANSVERSALITY_TOL};
use crate::oracle::{
    compare, compute_minimal, simulate_extremal, EdgePolicy, GridConfig, DEFAULT_SPINE_STEP, DEFAULT_SWEEP_CAP,
    DEFAULT_TOL_CONVERGE,
};
use crate::vectorfield::{field, find_stationary_points, integrate, StopConditions, VectorFieldState, ATOL, RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Candidate,
    Oracle,
    Compare,
    Field,
    Fissure,
    Report,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

pub const DEFAULT_DEPTH: usize = 60;
pub const DEFAULT_SIM_TOL: f64 = 1e-12;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    pub x1_min: f64,
    pub x1_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_converge: Option<f64>,
    pub sweep_cap: Option<usize>,
    /// Largest accepted |candidate − oracle| for `compare`.
    pub compare_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub n1: usize,
    pub n2: usize,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self { n1: 81, n2: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub start: [f64; 2],
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
}

fn default_direction() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default = "default_field_n")]
    pub n1: usize,
    #[serde(default = "default_field_n")]
    pub n2: usize,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
}

fn default_orientation() -> Orientation {
    Orientation::Left
}

fn default_field_n() -> usize {
    21
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self { orientation: Orientation::Left, n1: 21, n2: 21, curves: vec![] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub n_points: Option<usize>,
    pub stencil_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    /// x₁ window of the candidate; defaults to the grid range.
    pub window: Option<[f64; 2]>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub surface: SurfaceSpec,
    pub edge_policy: Option<EdgePolicy>,
    /// x₁ window of the comparison; defaults to the candidate window.
    pub inner_window: Option<[f64; 2]>,
    #[serde(default)]
    pub field: FieldSpec,
    /// Fissure node; defaults to every root of f₊′ − f₋′ in the window.
    pub u0: Option<f64>,
    #[serde(default)]
    pub report: ReportSpec,
}

impl RunConfig {
    pub fn validate(&self, command: Command) -> Result<(), String> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        BoundaryPair::from_coefficients(&self.f_plus, &self.f_minus).map_err(|e| e.to_string())?;
        if let Some([a, b]) = self.window {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(format!("window [{a}, {b}] must be finite and ordered"));
            }
        }
        let needs_grid = matches!(command, Command::Oracle | Command::Compare);
        match &self.grid {
            Some(g) => {
                if !(g.h > 0.0 && g.x1_min < g.x1_max) {
                    return Err("grid needs h > 0 and x1_min < x1_max".into());
                }
                let r = self.epsilon / g.h;
                if needs_grid && (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                    return Err(format!("epsilon / h = {r} is not an integer"));
                }
            }
            None if needs_grid => return Err("grid section required".into()),
            None => {}
        }
        if self.window.is_none() && self.grid.is_none() {
            return Err("either window or grid must be given".into());
        }
        if self.surface.n1 < 2 || self.surface.n2 < 2 {
            return Err("surface needs at least 2 × 2 samples".into());
        }
        Ok(())
    }

    pub fn pair(&self) -> BoundaryPair {
        BoundaryPair::from_coefficients(&self.f_plus, &self.f_minus).expect("validated")
    }

    pub fn strip(&self) -> Strip {
        Strip::new(self.epsilon).expect("validated")
    }

    pub fn window(&self) -> (f64, f64) {
        match (self.window, &self.grid) {
            (Some([a, b]), _) => (a, b),
            (None, Some(g)) => (g.x1_min, g.x1_max),
            (None, None) => unreachable!("validated"),
        }
    }

    fn grid_config(&self) -> GridConfig {
        let g = self.grid.as_ref().expect("validated");
        GridConfig {
            h: g.h,
            x1_range: (g.x1_min, g.x1_max),
            tol_converge: self.tolerances.tol_converge.unwrap_or(DEFAULT_TOL_CONVERGE),
            sweep_cap: self.tolerances.sweep_cap.unwrap_or(DEFAULT_SWEEP_CAP),
        }
    }
}

/// Numeric defaults in force for every run.
pub fn defaults() -> Value {
    json!({
        "axis_band": AXIS_BAND,
        "boundary_tol": BOUNDARY_TOL,
        "coefficient_tol": COEFF_TOL,
        "concavity_tol": CONCAVITY_TOL,
        "integrator_atol": ATOL,
        "integrator_rtol": RTOL,
        "oracle_sweep_cap": DEFAULT_SWEEP_CAP,
        "oracle_tol_converge": DEFAULT_TOL_CONVERGE,
        "seam_c1_tol": SEAM_C1_TOL,
        "sim_depth": DEFAULT_DEPTH,
        "sim_spine_step": DEFAULT_SPINE_STEP,
        "sim_tol": DEFAULT_SIM_TOL,
        "transversality_tol": TRANSVERSALITY_TOL,
        "verify_samples": DEFAULT_SAMPLES,
    })
}

/// Artifacts of a run, written together at the end.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, String)>,
    failed: bool,
}

impl Outputs {
    fn json(&mut self, name: &str, mut v: Value, cfg: &RunConfig) {
        if let Value::Object(m) = &mut v {
            m.insert("defaults".into(), defaults());
            m.insert("config".into(), serde_json::to_value(cfg).expect("serializable"));
        }
        // serde_json maps are ordered by key.
        let v: Value = serde_json::from_str(&v.to_string()).expect("round trip");
        self.files.push((name.into(), serde_json::to_string_pretty(&v).expect("serializable") + "\n"));
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) {
        let mut s = String::from(header);
        s.push('\n');
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.files.push((name.into(), s));
    }

    fn write(&self, out: &Path) -> std::io::Result<()> {
        fs::create_dir_all(out)?;
        for (name, body) in &self.files {
            fs::write(out.join(name), body)?;
        }
        Ok(())
    }
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

fn candidate(cfg: &RunConfig) -> Result<CandidateSurface, Error> {
    build_candidate(&cfg.pair(), &cfg.strip(), cfg.window())
}

fn plan_json(c: &CandidateSurface) -> Value {
    json!({
        "plan": c.plan.iter().map(|p| json!({
            "evaluator": p.evaluator.tag(),
            "region": serde_json::to_value(p.region).expect("serializable"),
        })).collect::<Vec<_>>(),
        "seams": serde_json::to_value(&c.seams).expect("serializable"),
        "window": [c.window.0, c.window.1],
    })
}

fn sampling(cfg: &RunConfig) -> Sampling {
    Sampling {
        n_points: cfg.report.n_points.unwrap_or(DEFAULT_SAMPLES),
        h: cfg.report.stencil_h.unwrap_or(cfg.epsilon / 64.0),
        seed: cfg.seed,
    }
}

fn execute(command: Command, cfg: &RunConfig, out: &mut Outputs) -> Result<(), Error> {
    match command {
        Command::Candidate => {
            let c = candidate(cfg)?;
            let rows = surface_grid(&c, cfg.surface.n1, cfg.surface.n2)?;
            out.csv("surface.csv", "x1,x2,B", rows.into_iter().map(|(a, b, v)| vec![a, b, v]));
            out.json("plan.json", plan_json(&c), cfg);
        }
        Command::Oracle => {
            let g = compute_minimal(&cfg.pair(), &cfg.strip(), &cfg.grid_config(), cfg.edge_policy.unwrap_or(EdgePolicy::ClampToCandidate))?;
            out.files.push(("oracle_grid.csv".into(), g.to_csv()));
            out.files.push(("convergence.csv".into(), g.log_csv()));
            out.json("oracle.json", oracle_summary(&g), cfg);
        }
        Command::Compare => {
            let c = candidate(cfg)?;
            let g = compute_minimal(&cfg.pair(), &cfg.strip(), &cfg.grid_config(), cfg.edge_policy.unwrap_or(EdgePolicy::ClampToCandidate))?;
            let inner = cfg.inner_window.map(|[a, b]| (a, b)).unwrap_or(c.window);
            let cmp = compare(&c, &g, inner)?;
            let bound = cfg.tolerances.compare_bound;
            let within = bound.map(|b| cmp.max_abs_diff <= b);
            out.failed = within == Some(false);
            out.files.push(("oracle_grid.csv".into(), g.to_csv()));
            out.json(
                "compare.json",
                json!({
                    "argmax": [cmp.argmax.x1, cmp.argmax.x2],
                    "bound": bound,
                    "inner_window": [inner.0, inner.1],
                    "max_abs_diff": cmp.max_abs_diff,
                    "nodes": cmp.nodes,
                    "oracle": oracle_summary(&g),
                    "signed_max": cmp.signed_max,
                    "signed_min": cmp.signed_min,
                    "within_bound": within,
                }),
                cfg,
            );
        }
        Command::Field => {
            let state = VectorFieldState::new(cfg.pair(), cfg.epsilon, cfg.field.orientation)?;
            let (a, b) = cfg.window();
            let e = cfg.epsilon;
            let (n1, n2) = (cfg.field.n1.max(2), cfg.field.n2.max(2));
            let mut rows = Vec::with_capacity(n1 * n2);
            for j in 0..n2 {
                let x2 = -e + 2.0 * e * j as f64 / (n2 - 1) as f64;
                for i in 0..n1 {
                    let x1 = a + (b - a) * i as f64 / (n1 - 1) as f64;
                    let v = field(&state, Point::new(x1, x2));
                    rows.push(vec![x1, x2, v.0, v.1]);
                }
            }
            out.csv("field.csv", "x1,x2,v1,v2", rows);
            let pts = find_stationary_points(&state, (a, b))?;
            out.json("stationary.json", json!({ "stationary_points": serde_json::to_value(&pts).expect("serializable") }), cfg);
            let mut curve_rows = Vec::new();
            let mut ends = Vec::new();
            for (k, cs) in cfg.field.curves.iter().enumerate() {
                let stop = StopConditions::new((a - 4.0 * e, b + 4.0 * e));
                let c = integrate(&state, point(cs.start), (cs.direction[0], cs.direction[1]), &stop)?;
                ends.push(c.termination.name());
                curve_rows.extend(c.samples.iter().map(|p| vec![k as f64, p.x1, p.x2]));
            }
            if !cfg.field.curves.is_empty() {
                out.csv("curves.csv", "curve,x1,x2", curve_rows);
                out.json("curves.json", json!({ "terminations": ends }), cfg);
            }
        }
        Command::Fissure => {
            let pair = cfg.pair();
            let strip = cfg.strip();
            let roots: Vec<f64> = match cfg.u0 {
                Some(u) => vec![u],
                None => derivative_difference_roots(&pair, cfg.window())?.iter().map(|r| r.u0).collect(),
            };
            if roots.is_empty() {
                return Err(Error::invalid("no root of f₊′ − f₋′ in the window"));
            }
            let mut layouts = Vec::new();
            let mut rows = Vec::new();
            for (k, u0) in roots.iter().enumerate() {
                let l = build_fissure(&pair, &strip, *u0)?;
                rows.extend(l.spine.samples.iter().map(|s| vec![k as f64, s.u, s.t, s.a]));
                layouts.push(serde_json::to_value(&l).expect("serializable"));
            }
            out.csv("spine.csv", "fissure,u,T,A", rows);
            out.json("layout.json", json!({ "fissures": layouts }), cfg);
        }
        Command::Report => {
            let c = candidate(cfg)?;
            let rep = verify_candidate(&c, sampling(cfg))?;
            out.failed = !rep.passes;
            let depth = cfg.report.depth.unwrap_or(DEFAULT_DEPTH);
            let tol = cfg.report.tol.unwrap_or(DEFAULT_SIM_TOL);
            let mut sims = Vec::new();
            for p in &cfg.report.points {
                let q = point(*p);
                let s = simulate_extremal(&c, q, depth, tol)?;
                let b = c.evaluate(q)?;
                let within = b - s.lower_bound <= s.residual_mass * s.local_max_f + 1e-6;
                out.failed |= !within;
                sims.push(json!({
                    "candidate": b,
                    "depth_used": s.depth_used,
                    "local_max_f": s.local_max_f,
                    "lower_bound": s.lower_bound,
                    "point": p,
                    "residual_mass": s.residual_mass,
                    "within_bound": within,
                }));
            }
            out.json(
                "report.json",
                json!({
                    "passes": !out.failed,
                    "plan": plan_json(&c),
                    "simulations": sims,
                    "verification": serde_json::to_value(&rep).expect("serializable"),
                }),
                cfg,
            );
        }
    }
    Ok(())
}

fn oracle_summary(g: &crate::oracle::OracleGrid) -> Value {
    json!({
        "concavity_defect": g.concavity_defect(),
        "h": g.h,
        "m": g.m,
        "min_change": g.min_change,
        "monotone": g.monotone(),
        "n1": g.n1,
        "passes": g.passes,
        "residual": g.residual,
        "scale": g.scale,
        "x1_range": [g.x1_range.0, g.x1_range.1],
    })
}

fn diagnostic(command: Command, e: &Error) -> Value {
    let invariant = match e {
        Error::FissureBuildFailure { invariant, .. } => Some(invariant.clone()),
        _ => None,
    };
    json!({
        "command": command,
        "error": e.kind(),
        "invariant": invariant,
        "message": e.to_string(),
    })
}

/// Run one command; returns the process exit code.
pub fn run(command: Command, config_path: &Path, out_dir: &Path, seed: Option<u64>) -> i32 {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", config_path.display());
            return EXIT_INVALID;
        }
    };
    let mut cfg: RunConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return EXIT_INVALID;
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Err(msg) = cfg.validate(command) {
        eprintln!("invalid config: {msg}");
        return EXIT_INVALID;
    }
    let mut out = Outputs::default();
    let code = match execute(command, &cfg, &mut out) {
        Ok(()) if out.failed => EXIT_FAILED,
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{command:?} failed: {e}");
            out.json("diagnostic.json", diagnostic(command, &e), &cfg);
            if matches!(e, Error::InvalidArgument(_)) {
                EXIT_INVALID
            } else {
                EXIT_FAILED
            }
        }
    };
    if let Err(e) = out.write(out_dir) {
        eprintln!("cannot write to {}: {e}", out_dir.display());
        return EXIT_FAILED;
    }
    code
}
