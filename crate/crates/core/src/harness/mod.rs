//! Orchestration: config → validate → solve → norms → bounds → verdicts.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, Applicability, BoundEntry, BoundInputs, BoundReport, ConstantUse};
use crate::domain::Mesh;
use crate::error::Result;
use crate::problem::{validate, DataNorms, ProblemSpec, Regime, ValidationReport};
use crate::sobolev::{estimate_rayleigh, Quotient, SobolevRegistry};
use crate::solver::{energy_ledger, mass_balance, solve, DiscreteSolution, EnergyLedger, NormEvaluator, NormReport, SolverOptions};

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{axis_path, CaseConfig, Format};
pub use sweep::{run_sweep, Axis, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Assumption checks only.
    Validate,
    /// Closed-form bounds without a solve.
    Bounds,
    /// Solve and measure norms.
    Solve,
    /// The full pipeline with verdicts.
    Verify,
}

impl Mode {
    fn solves(self) -> bool {
        matches!(self, Mode::Solve | Mode::Verify)
    }

    fn bounds(self) -> bool {
        matches!(self, Mode::Bounds | Mode::Verify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    /// Satisfied, but a consumed constant is only a numeric estimate.
    Conditional,
    /// The bound applies but nothing was measured (bounds-only runs).
    Unmeasured,
    Inapplicable,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// `measured ≤ bound`
    Upper,
    /// `measured ≥ bound`
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub id: String,
    /// Bound entry or invariant the row belongs to.
    pub source: String,
    pub quantity: String,
    pub sense: Sense,
    pub measured: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    /// Absolute allowance used for the comparison.
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<ConstantUse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Ratio of the same row after refining, for violated rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_ratio: Option<f64>,
}

impl CheckRow {
    fn compare(id: &str, source: &str, quantity: &str, sense: Sense, measured: f64, bound: f64, tolerance: f64) -> Self {
        let ok = match sense {
            Sense::Upper => measured <= bound + tolerance,
            Sense::Lower => measured >= bound - tolerance,
        };
        let ratio = match sense {
            Sense::Upper if bound > 0.0 => Some(measured / bound),
            Sense::Upper if measured <= 0.0 => Some(0.0),
            _ => None,
        };
        CheckRow {
            id: id.into(),
            source: source.into(),
            quantity: quantity.into(),
            sense,
            measured: Some(measured),
            bound: Some(bound),
            ratio: ratio.filter(|r| r.is_finite()),
            tolerance,
            verdict: if ok && measured.is_finite() { Verdict::Satisfied } else { Verdict::Violated },
            constants: Vec::new(),
            note: None,
            refined_ratio: None,
        }
    }

    fn inapplicable(id: &str, source: &str, quantity: &str, measured: Option<f64>, reason: Option<String>) -> Self {
        CheckRow {
            id: id.into(),
            source: source.into(),
            quantity: quantity.into(),
            sense: Sense::Upper,
            measured,
            bound: None,
            ratio: None,
            tolerance: 0.0,
            verdict: Verdict::Inapplicable,
            constants: Vec::new(),
            note: reason,
            refined_ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub dim: usize,
    pub divisions: Vec<usize>,
    pub vertices: usize,
    pub cells: usize,
    pub h_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub picard_iterations: usize,
    pub max_picard_residual: f64,
    pub mass_balance_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyLedger>,
    /// `max_k (‖u^k‖_1 + b_# Σ_{j≤k} dt ‖u^j‖^{ℓ-1}_{ℓ-1,Γ})`
    pub l1_running: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    pub mode: Mode,
    pub seed: u64,
    pub stages: Vec<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSummary>,
    pub regimes: Vec<Regime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_norms: Option<DataNorms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<SobolevRegistry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norms: Option<NormReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    pub rows: Vec<CheckRow>,
}

impl VerificationReport {
    pub fn row(&self, id: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn failed_stage(&self) -> Option<&Stage> {
        self.stages.iter().find(|s| !s.ok)
    }

    pub fn any_violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Violated)
    }

    /// 0 when every row is satisfied, conditional or inapplicable, 1 when a
    /// row is violated, 2 when a stage failed.
    pub fn exit_code(&self) -> i32 {
        if self.failed_stage().is_some() {
            2
        } else if self.any_violated() {
            1
        } else {
            0
        }
    }

    /// Worst ratio among rows of each source.
    pub fn worst_ratios(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for r in &self.rows {
            if let Some(x) = r.ratio {
                let e = out.entry(r.source.clone()).or_insert(f64::NEG_INFINITY);
                *e = e.max(x);
            }
        }
        out
    }

    pub fn bound_value(&self, entry: &str, key: &str) -> Option<f64> {
        self.bounds.as_ref()?.entry(entry)?.get(key)
    }
}

/// Timing and environment, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub parallel: bool,
    pub started_unix_s: u64,
}

/// Everything a run produced.
pub struct CaseOutcome {
    pub report: VerificationReport,
    pub metadata: RunMetadata,
    pub spec: Option<ProblemSpec>,
    pub mesh: Option<Mesh>,
    pub solution: Option<DiscreteSolution>,
}

struct Recorder {
    stages: Vec<Stage>,
}

impl Recorder {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        match f() {
            Ok(v) => {
                self.stages.push(Stage {
                    name: name.into(),
                    ok: true,
                    error: None,
                });
                Some(v)
            }
            Err(e) => {
                self.stages.push(Stage {
                    name: name.into(),
                    ok: false,
                    error: Some(e.to_string()),
                });
                None
            }
        }
    }
}

/// Registry with user overrides, analytic bounds for every needed key and,
/// when enabled, numeric estimates for keys still missing.
pub fn build_registry(cfg: &CaseConfig, spec: &ProblemSpec, mesh: &Mesh, inp: &BoundInputs) -> Result<SobolevRegistry> {
    let mut reg = SobolevRegistry::new(&spec.domain);
    for c in &cfg.registry.constants {
        reg.insert_user(c.kind, c.p, c.q, c.value)?;
    }
    bounds::populate_analytic(&mut reg, &spec.domain, inp)?;
    if cfg.registry.estimate_missing {
        let mut opts = cfg.registry.estimator;
        opts.seed = opts.seed.wrapping_add(cfg.seed);
        for (kind, p, q) in bounds::required_constants(inp) {
            if reg.lookup(kind, p, q).is_err() {
                let out = estimate_rayleigh(mesh, kind, p, q, &opts, None)?;
                reg.insert(out.estimate)?;
            }
        }
    }
    Ok(reg)
}

/// Runs the pipeline up to `mode`. Stage failures are recorded; the report is
/// always produced.
pub fn run_case(cfg: &CaseConfig, mode: Mode) -> CaseOutcome {
    let start = Instant::now();
    let started_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut rec = Recorder { stages: Vec::new() };
    let mut report = VerificationReport {
        case: cfg.name.clone(),
        mode,
        seed: cfg.seed,
        stages: Vec::new(),
        mesh: None,
        regimes: Vec::new(),
        validation: None,
        data_norms: None,
        registry: None,
        bounds: None,
        norms: None,
        diagnostics: None,
        rows: Vec::new(),
    };
    let mut outcome_mesh = None;
    let mut solution = None;

    let spec = rec.run("config", || cfg.problem.to_spec());
    if let Some(spec) = &spec {
        if let Some(mesh) = rec.run("mesh", || cfg.discretization.mesh(&spec.domain)) {
            pipeline(cfg, mode, spec, &mesh, &mut rec, &mut report, &mut solution);
            outcome_mesh = Some(mesh);
        }
    }
    report.stages = rec.stages;

    if report.any_violated() && cfg.discretization.refine_on_violation && mode == Mode::Verify {
        if let (Some(mesh), Some(sol)) = (&outcome_mesh, &solution) {
            let mut fine = cfg.clone();
            fine.discretization = cfg.discretization.refined(mesh, sol.dt);
            let refined = run_case(&fine, mode).report;
            for row in report.rows.iter_mut().filter(|r| r.verdict == Verdict::Violated) {
                row.refined_ratio = refined.row(&row.id).and_then(|r| r.ratio);
                let status = refined.row(&row.id).map(|r| r.verdict);
                row.note = Some(match status {
                    Some(Verdict::Violated) => "still violated at (h/2, dt/4)".into(),
                    Some(v) => format!("{:?} at (h/2, dt/4)", v).to_lowercase(),
                    None => "refined run did not produce this row".into(),
                });
            }
        }
    }

    CaseOutcome {
        metadata: RunMetadata {
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            wall_time_s: start.elapsed().as_secs_f64(),
            parallel: cfg.exec.is_parallel(),
            started_unix_s,
        },
        report,
        spec,
        mesh: outcome_mesh,
        solution,
    }
}

fn pipeline(
    cfg: &CaseConfig,
    mode: Mode,
    spec: &ProblemSpec,
    mesh: &Mesh,
    rec: &mut Recorder,
    report: &mut VerificationReport,
    solution: &mut Option<DiscreteSolution>,
) {
    let mut summary = MeshSummary {
        dim: mesh.dim,
        divisions: mesh.divisions.clone(),
        vertices: mesh.n_vertices(),
        cells: mesh.n_cells(),
        h_max: mesh.h_max,
        dt: None,
        steps: None,
    };
    let validation = validate(spec, mesh, &cfg.sampling);
    report.regimes = validation.regimes.clone();
    report.validation = Some(validation.clone());
    if mode == Mode::Validate {
        report.mesh = Some(summary);
        return;
    }

    let sopts = cfg.discretization.solver_options(spec, mesh, cfg.exec);
    let mut sampling = cfg.sampling;
    if mode.solves() {
        if let Some(steps) = rec.run("time grid", || sopts.steps(spec.domain.time_horizon)) {
            summary.dt = Some(sopts.dt);
            summary.steps = Some(steps);
            // Data norms on the solver's own time grid.
            sampling.time_steps = Some(steps);
        }
    }
    report.mesh = Some(summary);

    let inputs = rec.run("data norms", || {
        let mut inp = BoundInputs::from_problem(spec, mesh, &validation, &sampling)?;
        inp.sigma_override = cfg.registry.sigma;
        Ok(inp)
    });
    if let Some(inp) = &inputs {
        report.data_norms = Some(inp.norms);
    }

    let mut bound_report = None;
    if mode.bounds() {
        if let Some(inp) = &inputs {
            if let Some(reg) = rec.run("registry", || build_registry(cfg, spec, mesh, inp)) {
                let b = bounds::evaluate(inp, &reg, &cfg.registry.series);
                report.registry = Some(reg);
                bound_report = Some(b);
            }
        }
    }
    report.bounds = bound_report.clone();

    if !mode.solves() || summary_steps(report).is_none() {
        if let (Some(b), Mode::Bounds) = (&bound_report, mode) {
            report.rows = bound_rows(b, None, inputs.as_ref(), cfg.discretization.bound_rel_tol);
        }
        return;
    }

    let Some(sol) = rec.run("solve", || solve(spec, mesh, &sopts)) else {
        return;
    };
    let ev = NormEvaluator::new(mesh, sopts.quad_points);
    let norms = ev.report(&sol, spec.p, spec.law.ell, &[], cfg.exec);
    let diag = diagnostics(spec, mesh, &sol, &sopts, &ev);
    if mode == Mode::Verify {
        let mut rows = Vec::new();
        if let Some(b) = &bound_report {
            let measured = Measured {
                norms: &norms,
                diag: &diag,
            };
            rows.extend(bound_rows(b, Some(&measured), inputs.as_ref(), cfg.discretization.bound_rel_tol));
            rows.extend(embedding_rows(b, mesh, &sol, sopts.quad_points, cfg));
        }
        rows.extend(invariant_rows(&sol, &diag, &ev, cfg));
        report.rows = rows;
    }
    report.norms = Some(norms);
    report.diagnostics = Some(diag);
    *solution = Some(sol);
}

fn summary_steps(report: &VerificationReport) -> Option<usize> {
    report.mesh.as_ref()?.steps
}

fn diagnostics(spec: &ProblemSpec, mesh: &Mesh, sol: &DiscreteSolution, opts: &SolverOptions, ev: &NormEvaluator) -> Diagnostics {
    let mb = mass_balance(sol, spec, mesh, opts);
    let energy = spec.drift.field.is_zero().then(|| energy_ledger(sol, spec, mesh, opts));
    let ell = spec.law.ell;
    let b = spec.law.b_lower;
    let mut acc = 0.0;
    let mut running = ev.space(&sol.states[0], 1.0);
    for k in 1..sol.states.len() {
        if b > 0.0 {
            acc += sol.dt * b * ev.gamma(&sol.states[k], ell - 1.0).powf(ell - 1.0);
        }
        running = running.max(ev.space(&sol.states[k], 1.0) + acc);
    }
    Diagnostics {
        picard_iterations: sol.total_picard_iterations(),
        max_picard_residual: sol.steps.iter().fold(0.0, |m, s| m.max(s.residual)),
        mass_balance_max: mb.iter().fold(0.0, |m, r| m.max(r.abs())),
        energy,
        l1_running: running,
    }
}

struct Measured<'a> {
    norms: &'a NormReport,
    diag: &'a Diagnostics,
}

/// Rows comparing measured norms against every bound entry.
fn bound_rows(b: &BoundReport, m: Option<&Measured>, inp: Option<&BoundInputs>, rel_tol: f64) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let (a_lower, b_lower) = inp.map(|i| (i.a_lower, i.b_lower)).unwrap_or((0.0, 0.0));
    for e in &b.entries {
        let checks: Vec<(&str, &str, &str, Option<f64>)> = match e.id.as_str() {
            bounds::ENERGY_L2 => vec![
                ("sup_l2", "‖u‖²_{2,∞,Q_T}", "rhs_Linf", m.map(|m| m.norms.l2_linf.powi(2))),
                (
                    "energy",
                    "a_#‖∇u‖²_{2,Q_T} + b_#‖u‖^ℓ_{ℓ,Σ_T}",
                    "rhs_energy",
                    m.map(|m| a_lower * m.norms.grad_l2.powi(2) + b_lower * m.norms.trace_ell.powf(m.norms.ell)),
                ),
            ],
            bounds::MAX_PRINCIPLE => vec![
                ("sup", "ess sup_{Q_T} u", "M", m.map(|m| m.norms.sup)),
                ("boundary", "ess sup_{Σ_T} u", "boundary_max", m.map(|m| m.norms.sup_gamma)),
            ],
            bounds::L1_DATA => vec![
                (
                    "l1",
                    "‖u‖_{1,∞,Q_T} + b_#‖u‖^{ℓ-1}_{ℓ-1,Σ_T}",
                    "Z",
                    m.map(|m| m.norms.l1_linf + b_lower * m.norms.trace_ell_minus_one.powf(m.norms.ell - 1.0)),
                ),
                (
                    "l1_running",
                    "max_t (‖u(t)‖_1 + b_#‖u‖^{ℓ-1}_{ℓ-1,Σ_t})",
                    "Z",
                    m.map(|m| m.diag.l1_running),
                ),
                ("gradient", "‖∇u‖^p_{p,Q_T}", "rhs_gradient_p", m.map(|m| m.norms.grad_p.powf(m.norms.p))),
            ],
            bounds::ENERGY_B0 => vec![
                ("sup_l2", "‖u‖_{2,∞,Q_T}", "rhs_Linf", m.map(|m| m.norms.l2_linf)),
                ("gradient", "‖∇u‖²_{2,Q_T}", "rhs_grad", m.map(|m| m.norms.grad_l2.powi(2))),
            ],
            bounds::L1_B0 => vec![
                ("l1", "‖u‖_{1,∞,Q_T}", "Z", m.map(|m| m.norms.l1_linf)),
                ("gradient", "‖∇u‖^p_{p,Q_T}", "rhs_gradient_p", m.map(|m| m.norms.grad_p.powf(m.norms.p))),
            ],
            bounds::MIN_PRINCIPLE => {
                rows.push(min_row(e, m));
                continue;
            }
            _ => Vec::new(),
        };
        for (suffix, quantity, key, measured) in checks {
            let id = format!("{}.{}", e.id, suffix);
            rows.push(entry_row(e, &id, quantity, key, measured, rel_tol));
        }
    }
    rows
}

fn entry_row(e: &BoundEntry, id: &str, quantity: &str, key: &str, measured: Option<f64>, rel_tol: f64) -> CheckRow {
    let bound = e.get(key).filter(|v| !v.is_nan());
    let (bound, measured) = match (e.applicability, bound) {
        (Applicability::Inapplicable, _) | (_, None) => {
            return CheckRow::inapplicable(id, &e.id, quantity, measured, e.reason.clone());
        }
        (_, Some(b)) => (b, measured),
    };
    let mut row = match measured {
        Some(m) => CheckRow::compare(id, &e.id, quantity, Sense::Upper, m, bound, rel_tol * bound.abs()),
        None => CheckRow {
            bound: Some(bound),
            verdict: Verdict::Unmeasured,
            ..CheckRow::inapplicable(id, &e.id, quantity, None, None)
        },
    };
    if row.verdict == Verdict::Satisfied && e.applicability == Applicability::Conditional {
        row.verdict = Verdict::Conditional;
    }
    row.constants = e.constants.clone();
    row
}

fn min_row(e: &BoundEntry, m: Option<&Measured>) -> CheckRow {
    let id = format!("{}.min", e.id);
    let quantity = "min_{Q_T} u";
    match (e.applicability, m) {
        (Applicability::Inapplicable, _) | (_, None) => {
            CheckRow::inapplicable(&id, &e.id, quantity, m.map(|m| m.norms.inf), e.reason.clone())
        }
        (_, Some(m)) => CheckRow::compare(&id, &e.id, quantity, Sense::Lower, m.norms.inf, 0.0, 1e-8),
    }
}

/// Checks `‖v‖_target ≤ C ‖v‖_source` on every step for each upper constant consumed.
fn embedding_rows(b: &BoundReport, mesh: &Mesh, sol: &DiscreteSolution, quad: usize, cfg: &CaseConfig) -> Vec<CheckRow> {
    let mut seen: Vec<&ConstantUse> = Vec::new();
    for e in b.entries.iter().filter(|e| e.is_usable()) {
        for c in &e.constants {
            if c.provenance.is_upper() && !seen.iter().any(|s| s.symbol == c.symbol) {
                seen.push(c);
            }
        }
    }
    seen.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    let mut rows = Vec::new();
    for c in seen {
        let id = format!("embedding.{}", c.symbol);
        let Ok(quot) = Quotient::new(mesh, c.kind, c.p, c.q, quad.max(3)) else {
            continue;
        };
        let values = cfg.exec.map(&sol.states, |u| quot.value(u));
        let worst = values.into_iter().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let mut row = CheckRow::compare(&id, "embedding", "‖v‖_target / ‖v‖_source", Sense::Upper, worst, c.value, 1e-12 * c.value);
        row.constants = vec![c.clone()];
        rows.push(row);
    }
    rows
}

/// Interpolation pairs `(2,∞)` and `(4,2)` checked at these weights.
const INTERPOLATION_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];

fn invariant_rows(sol: &DiscreteSolution, diag: &Diagnostics, ev: &NormEvaluator, cfg: &CaseConfig) -> Vec<CheckRow> {
    let tol = cfg.discretization.check_tol;
    let mut rows = Vec::new();
    let mass_scale = sol.states.iter().map(|u| ev.integral(u).abs()).fold(1.0, f64::max) / sol.dt;
    rows.push(CheckRow::compare(
        "invariant.mass_balance",
        "invariant",
        "max_k |discrete mass residual|",
        Sense::Upper,
        diag.mass_balance_max,
        0.0,
        tol * mass_scale,
    ));
    if let Some(e) = &diag.energy {
        rows.push(CheckRow::compare(
            "invariant.discrete_energy",
            "invariant",
            "½|u^K|² + a_#Σdt‖∇u^k‖² + b_#Σdt‖u^k‖^ℓ_{ℓ,Γ}",
            Sense::Upper,
            e.lhs,
            e.rhs,
            tol,
        ));
    }
    let a = ev_mixed(ev, sol, 2.0, f64::INFINITY, cfg);
    let b = ev_mixed(ev, sol, 4.0, 2.0, cfg);
    for lambda in INTERPOLATION_WEIGHTS {
        let (p, p1) = bounds::interpolation_exponents((2.0, f64::INFINITY), (4.0, 2.0), lambda);
        let measured = ev_mixed(ev, sol, p, p1, cfg);
        if let Ok(bound) = bounds::interpolation_bound(a, b, lambda) {
            rows.push(CheckRow::compare(
                &format!("invariant.interpolation[{lambda}]"),
                "invariant",
                &format!("‖u‖_{{{p:.4},{p1:.4},Q_T}}"),
                Sense::Upper,
                measured,
                bound,
                1e-12 * bound.max(1e-300),
            ));
        }
    }
    rows
}

fn ev_mixed(ev: &NormEvaluator, sol: &DiscreteSolution, p: f64, q: f64, cfg: &CaseConfig) -> f64 {
    ev.mixed(sol, p, q, cfg.exec)
}

/// Loads a config file and runs `mode` on it.
pub fn load_and_run(path: &std::path::Path, mode: Mode) -> Result<CaseOutcome> {
    let cfg = CaseConfig::load(path)?;
    Ok(run_case(&cfg, mode))
}
