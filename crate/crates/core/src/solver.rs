//! P1 finite elements in space, implicit Euler in time.
//!
//! Each step solves
//!
//! ```text
//! M_L (u - u_prev)/dt + K u + B(w) u - C(w) u = F + H
//! ```
//!
//! where `M_L` is the lumped mass, `K` the stiffness of `A`, `B(w)` the
//! lumped boundary matrix of `b(w)` on Γ and `C(w)` the drift matrix
//! `∫ g(w) φ_j E·∇φ_i` with `g(w) = T_m(w)/w`. The lag `w` is updated by a
//! damped fixed-point loop. Loads `F`, `H` use Gauss quadrature, so their sums
//! are the quadrature integrals of f and h.

use serde::{Deserialize, Serialize};

use crate::domain::{BoxFace, Mesh};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::{cell_gradient, gradient_norm, LinearSolver, QuadSet, Triplets};
use crate::problem::{ProblemSpec, Truncation};
use crate::quadrature::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub dt: f64,
    pub truncation: Truncation,
    /// Replace f by `m f/(m + |f|)` when a truncation level is set.
    pub regularize_source: bool,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub damping: f64,
    /// Adds cellwise artificial diffusion `|E| h_K / 2`.
    pub upwind: bool,
    /// Gauss points per direction for loads and the drift matrix.
    pub quad_points: usize,
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dt: 1e-2,
            truncation: Truncation::None,
            regularize_source: true,
            picard_tol: 1e-12,
            picard_max: 500,
            damping: 0.5,
            upwind: false,
            quad_points: 3,
            exec: Exec::Parallel,
        }
    }
}

impl SolverOptions {
    /// Number of steps; `dt` must divide the horizon.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        let k = (horizon / self.dt).round();
        if k < 1.0 || (k * self.dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Config(format!("dt = {} does not divide T = {}", self.dt, horizon)));
        }
        Ok(k as usize)
    }

    /// `h² / a^#`, rounded so that it divides the horizon.
    pub fn default_dt(mesh: &Mesh, a_upper: f64, horizon: f64) -> f64 {
        let raw = mesh.h_max * mesh.h_max / a_upper.max(f64::MIN_POSITIVE);
        horizon / (horizon / raw).ceil().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub dt: f64,
    pub times: Vec<f64>,
    /// Nodal values at every time, `states[0]` the projected initial value.
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<StepInfo>,
}

impl DiscreteSolution {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("at least the initial state")
    }

    /// Values at the Γ vertices for step `k`.
    pub fn trace(&self, mesh: &Mesh, k: usize) -> Vec<(usize, f64)> {
        let w = mesh.gamma_node_weights();
        (0..mesh.n_vertices()).filter(|&i| w[i] > 0.0).map(|i| (i, self.states[k][i])).collect()
    }

    pub fn total_picard_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

/// Lumped L² projection: `u_i = ∫ u₀ φ_i / ∫ φ_i`.
pub fn project_initial(spec: &ProblemSpec, mesh: &Mesh, quad_points: usize) -> Vec<f64> {
    let n = spec.dim();
    let cells = QuadSet::cells(mesh, quad_points);
    let mut num = vec![0.0; mesh.n_vertices()];
    for s in 0..cells.len() {
        let v = spec.data.u0.eval(&cells.points[s][..n], 0.0) * cells.weights[s];
        for a in 0..cells.arity {
            num[cells.nodes[s][a]] += v * cells.shape[s][a];
        }
    }
    let m = mesh.lumped_mass();
    num.iter().zip(&m).map(|(x, mi)| x / mi).collect()
}

/// Per-vertex Γ weights split by face, for evaluating `b(face, ξ)`.
#[derive(Debug, Clone)]
struct GammaNodes {
    /// `(vertex, face, weight)`
    entries: Vec<(usize, BoxFace, f64)>,
}

impl GammaNodes {
    fn new(mesh: &Mesh) -> Self {
        let mut entries: Vec<(usize, BoxFace, f64)> = Vec::new();
        for (_, f) in mesh.gamma_facets() {
            for &v in f.nodes(mesh.dim) {
                entries.push((v, f.face, f.area / mesh.dim as f64));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, BoxFace, f64)> = Vec::new();
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        GammaNodes { entries: merged }
    }

    /// Diagonal `Σ w b(face, u_i)`.
    fn diagonal(&self, spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; u.len()];
        for &(i, face, w) in &self.entries {
            d[i] += w * spec.law.eval(face, u[i]);
        }
        d
    }

    /// `Σ_i w b(u_i) u_i`
    fn flux(&self, spec: &ProblemSpec, u: &[f64]) -> f64 {
        let mut s = NeumaierSum::default();
        for &(i, face, w) in &self.entries {
            s.add(w * spec.law.eval(face, u[i]) * u[i]);
        }
        s.value()
    }

    /// `Σ_i w |u_i|^t`
    fn power(&self, u: &[f64], t: f64) -> f64 {
        let mut s = NeumaierSum::default();
        for &(i, _, w) in &self.entries {
            s.add(w * u[i].abs().powf(t));
        }
        s.value()
    }
}

/// Assembled pieces reused across steps.
pub struct Assembler<'a> {
    spec: &'a ProblemSpec,
    mesh: &'a Mesh,
    opts: SolverOptions,
    lumped: Vec<f64>,
    stiffness: Triplets,
    cells: QuadSet,
    gamma_quad: QuadSet,
    gamma: GammaNodes,
    drift_zero: bool,
    linear: bool,
}

impl<'a> Assembler<'a> {
    pub fn new(spec: &'a ProblemSpec, mesh: &'a Mesh, opts: SolverOptions) -> Self {
        let n = spec.dim();
        let drift_zero = spec.drift.field.is_zero();
        let mut coefs: Vec<[[f64; 3]; 3]> = opts.exec.map_range(mesh.n_cells(), |c| {
            let x = centroid(mesh, c);
            spec.diffusion.field.eval(&x[..n], n)
        });
        if opts.upwind && !drift_zero {
            // Time-independent bound on |E| over the horizon, sampled at the steps.
            let steps = opts.steps(spec.domain.time_horizon).unwrap_or(1);
            for (c, a) in coefs.iter_mut().enumerate() {
                let x = centroid(mesh, c);
                let mut e = [0.0; 3];
                let mut emax: f64 = 0.0;
                for k in 0..=steps {
                    let t = spec.domain.time_horizon * k as f64 / steps as f64;
                    spec.drift.field.eval(&x[..n], t, &mut e[..n]);
                    emax = emax.max(e[..n].iter().map(|v| v * v).sum::<f64>().sqrt());
                }
                let hk = mesh.cell_volume[c].powf(1.0 / n as f64) * (2.0f64).sqrt();
                for (d, row) in a.iter_mut().enumerate().take(n) {
                    row[d] += 0.5 * emax * hk;
                }
            }
        }
        let stiffness = crate::fem::stiffness(mesh, |c| coefs[c]);
        let linear = spec.law.is_constant() && (drift_zero || opts.truncation == Truncation::None);
        Assembler {
            spec,
            mesh,
            opts,
            lumped: mesh.lumped_mass(),
            stiffness,
            cells: QuadSet::cells(mesh, opts.quad_points),
            gamma_quad: QuadSet::gamma(mesh, opts.quad_points),
            gamma: GammaNodes::new(mesh),
            drift_zero,
            linear,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    fn source(&self, f: f64) -> f64 {
        if self.opts.regularize_source {
            self.opts.truncation.regularize_source(f)
        } else {
            f
        }
    }

    /// `F_i = ∫ f(t) φ_i` (regularized when truncating).
    pub fn source_load(&self, t: f64) -> Vec<f64> {
        let n = self.spec.dim();
        let mut out = vec![0.0; self.mesh.n_vertices()];
        if self.spec.data.f.is_zero() {
            return out;
        }
        let q = &self.cells;
        for s in 0..q.len() {
            let v = self.source(self.spec.data.f.eval(&q.points[s][..n], t)) * q.weights[s];
            for a in 0..q.arity {
                out[q.nodes[s][a]] += v * q.shape[s][a];
            }
        }
        out
    }

    /// `H_i = ∫_Γ h(t) φ_i`
    pub fn boundary_load(&self, t: f64) -> Vec<f64> {
        let n = self.spec.dim();
        let mut out = vec![0.0; self.mesh.n_vertices()];
        if self.spec.data.h.is_zero() {
            return out;
        }
        let q = &self.gamma_quad;
        for s in 0..q.len() {
            let v = self.spec.data.h.eval(&q.points[s][..n], t) * q.weights[s];
            for a in 0..q.arity {
                out[q.nodes[s][a]] += v * q.shape[s][a];
            }
        }
        out
    }

    /// Drift matrix entries `∫ g(w) φ_j E·∇φ_i`, cell by cell in order.
    fn drift(&self, w: &[f64], t: f64, out: &mut Triplets, scale: f64) {
        if self.drift_zero {
            return;
        }
        let n = self.spec.dim();
        let q = &self.cells;
        let per_cell = q.len() / self.mesh.n_cells().max(1);
        let trunc = self.opts.truncation;
        let blocks: Vec<Vec<(usize, usize, f64)>> = self.opts.exec.map_range(self.mesh.n_cells(), |c| {
            let nodes = self.mesh.cell(c);
            let g = &self.mesh.cell_grad[c];
            let mut local = [[0.0; 4]; 4];
            let mut e = [0.0; 3];
            for s in c * per_cell..(c + 1) * per_cell {
                self.spec.drift.field.eval(&q.points[s][..n], t, &mut e[..n]);
                let factor = if trunc == Truncation::None { 1.0 } else { trunc.factor(q.value(s, w)) };
                let wq = q.weights[s] * factor;
                for i in 0..=n {
                    let edg: f64 = (0..n).map(|d| e[d] * g[i][d]).sum();
                    for j in 0..=n {
                        local[i][j] += wq * q.shape[s][j] * edg;
                    }
                }
            }
            let mut v = Vec::with_capacity((n + 1) * (n + 1));
            for i in 0..=n {
                for j in 0..=n {
                    v.push((nodes[i], nodes[j], local[i][j]));
                }
            }
            v
        });
        for b in blocks {
            for (i, j, v) in b {
                out.add(i, j, scale * v);
            }
        }
    }

    fn matrix(&self, w: &[f64], t: f64) -> Triplets {
        let mut m = self.stiffness.clone();
        m.add_diagonal(&self.lumped, 1.0 / self.opts.dt);
        m.add_diagonal(&self.gamma.diagonal(self.spec, w), 1.0);
        self.drift(w, t, &mut m, -1.0);
        m
    }

    /// Advances `prev` to time `t` (the end of the step).
    pub fn step(&self, prev: &[f64], t: f64, cache: &mut Option<LinearSolver>) -> Result<(Vec<f64>, StepInfo)> {
        let dt = self.opts.dt;
        let f = self.source_load(t);
        let h = self.boundary_load(t);
        let rhs: Vec<f64> = (0..prev.len()).map(|i| self.lumped[i] * prev[i] / dt + f[i] + h[i]).collect();
        if self.linear {
            let reuse = cache.is_some() && self.autonomous();
            if !reuse {
                *cache = Some(LinearSolver::from_triplets(&self.matrix(prev, t))?);
            }
            let u = cache.as_ref().expect("factored").solve(&rhs)?;
            return Ok((u, StepInfo { iterations: 1, residual: 0.0 }));
        }
        let omega = self.opts.damping;
        let mut w = prev.to_vec();
        let mut residual = f64::INFINITY;
        for it in 1..=self.opts.picard_max {
            let u = LinearSolver::from_triplets(&self.matrix(&w, t))?.solve(&rhs)?;
            let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            residual = u.iter().zip(&w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            if residual <= self.opts.picard_tol {
                return Ok((u, StepInfo { iterations: it, residual }));
            }
            for (wi, ui) in w.iter_mut().zip(&u) {
                *wi += omega * (ui - *wi);
            }
        }
        Err(Error::Picard { step: 0, residual })
    }

    /// Whether the linear system is the same at every step.
    fn autonomous(&self) -> bool {
        self.drift_zero || self.spec.drift.field.time == crate::problem::TimeProfile::Constant
    }

    /// `Σ_i w_i b(u_i) u_i` over Γ with the lumped rule used by the scheme.
    pub fn boundary_flux(&self, u: &[f64]) -> f64 {
        self.gamma.flux(self.spec, u)
    }

    /// `Σ_i w_i |u_i|^t` over Γ.
    pub fn boundary_power(&self, u: &[f64], t: f64) -> f64 {
        self.gamma.power(u, t)
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }
}

fn centroid(mesh: &Mesh, c: usize) -> [f64; 3] {
    let mut x = [0.0; 3];
    let nodes = mesh.cell(c);
    for &v in nodes {
        for d in 0..mesh.dim {
            x[d] += mesh.vertices[v][d] / nodes.len() as f64;
        }
    }
    x
}

/// Runs the scheme over `[0, T]`.
pub fn solve(spec: &ProblemSpec, mesh: &Mesh, opts: &SolverOptions) -> Result<DiscreteSolution> {
    let steps = opts.steps(spec.domain.time_horizon)?;
    let asm = Assembler::new(spec, mesh, *opts);
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut info = Vec::with_capacity(steps);
    states.push(project_initial(spec, mesh, opts.quad_points));
    times.push(0.0);
    let mut cache = None;
    for k in 1..=steps {
        let t = spec.domain.time_horizon * k as f64 / steps as f64;
        let (u, si) = asm.step(&states[k - 1], t, &mut cache).map_err(|e| match e {
            Error::Picard { residual, .. } => Error::Picard { step: k, residual },
            other => other,
        })?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("solution at step {k}")));
        }
        states.push(u);
        times.push(t);
        info.push(si);
    }
    Ok(DiscreteSolution {
        dt: opts.dt,
        times,
        states,
        steps: info,
    })
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Norms of a discrete solution. Spatial norms use Gauss quadrature; time
/// integrals use the right-endpoint rule on the step grid; sup-in-time norms
/// include the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `‖u‖_{2,∞,Q_T}`
    pub l2_linf: f64,
    /// `‖u‖_{1,∞,Q_T}`
    pub l1_linf: f64,
    /// `‖∇u‖_{2,Q_T}`
    pub grad_l2: f64,
    /// `‖∇u‖_{p,Q_T}`
    pub grad_p: f64,
    pub p: f64,
    /// `‖u‖_{ℓ,Σ_T}`
    pub trace_ell: f64,
    /// `‖u‖_{ℓ-1,Σ_T}`
    pub trace_ell_minus_one: f64,
    /// `‖u‖_{2,Σ_T}`
    pub trace_l2: f64,
    pub ell: f64,
    /// Largest nodal value over all steps.
    pub sup: f64,
    /// Smallest nodal value over all steps.
    pub inf: f64,
    pub sup_abs: f64,
    /// Largest nodal value on Γ over the steps `1..K`.
    pub sup_gamma: f64,
    /// Requested `‖u‖_{p,q,Q_T}` as `[p, q, value]`.
    pub mixed: Vec<[f64; 3]>,
}

/// Quadrature sets reused across norm evaluations.
pub struct NormEvaluator<'a> {
    mesh: &'a Mesh,
    cells: QuadSet,
    gamma: QuadSet,
}

impl<'a> NormEvaluator<'a> {
    pub fn new(mesh: &'a Mesh, quad_points: usize) -> Self {
        NormEvaluator {
            mesh,
            cells: QuadSet::cells(mesh, quad_points),
            gamma: QuadSet::gamma(mesh, quad_points),
        }
    }

    pub fn space(&self, u: &[f64], p: f64) -> f64 {
        self.cells.lp_norm(u, p)
    }

    pub fn gamma(&self, u: &[f64], p: f64) -> f64 {
        if self.gamma.is_empty() {
            return 0.0;
        }
        self.gamma.lp_norm(u, p)
    }

    pub fn integral(&self, u: &[f64]) -> f64 {
        self.cells.integrate(u)
    }

    /// `∫_Ω |∇u|^p`
    pub fn grad_power(&self, u: &[f64], p: f64) -> f64 {
        gradient_norm(self.mesh, u, p).powf(p)
    }

    /// `(Σ_k dt g_k^q)^{1/q}` over `k = 1..K`; `q = ∞` takes the max over all k.
    fn time_norm(sol: &DiscreteSolution, values: &[f64], q: f64) -> f64 {
        if q.is_infinite() {
            return values.iter().fold(0.0, |m, v| m.max(*v));
        }
        let mut s = NeumaierSum::default();
        for v in &values[1..] {
            s.add(sol.dt * v.powf(q));
        }
        s.value().powf(1.0 / q)
    }

    /// `‖u‖_{p,q,Q_T}`
    pub fn mixed(&self, sol: &DiscreteSolution, p: f64, q: f64, exec: Exec) -> f64 {
        let spatial = exec.map(&sol.states, |u| self.space(u, p));
        Self::time_norm(sol, &spatial, q)
    }

    /// `‖u‖_{p,q,Σ_T}`
    pub fn mixed_gamma(&self, sol: &DiscreteSolution, p: f64, q: f64, exec: Exec) -> f64 {
        let spatial = exec.map(&sol.states, |u| self.gamma(u, p));
        Self::time_norm(sol, &spatial, q)
    }

    /// `‖∇u‖_{p,q,Q_T}`
    pub fn mixed_grad(&self, sol: &DiscreteSolution, p: f64, q: f64, exec: Exec) -> f64 {
        let spatial = exec.map(&sol.states, |u| gradient_norm(self.mesh, u, p));
        Self::time_norm(sol, &spatial, q)
    }

    pub fn report(&self, sol: &DiscreteSolution, p: f64, ell: f64, requests: &[(f64, f64)], exec: Exec) -> NormReport {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for u in &sol.states {
            for &v in u {
                sup = sup.max(v);
                inf = inf.min(v);
            }
        }
        let gw = self.mesh.gamma_node_weights();
        let mut sup_gamma = f64::NEG_INFINITY;
        for u in &sol.states[1..] {
            for (i, &v) in u.iter().enumerate() {
                if gw[i] > 0.0 {
                    sup_gamma = sup_gamma.max(v);
                }
            }
        }
        NormReport {
            l2_linf: self.mixed(sol, 2.0, f64::INFINITY, exec),
            l1_linf: self.mixed(sol, 1.0, f64::INFINITY, exec),
            grad_l2: self.mixed_grad(sol, 2.0, 2.0, exec),
            grad_p: self.mixed_grad(sol, p, p, exec),
            p,
            trace_ell: self.mixed_gamma(sol, ell, ell, exec),
            trace_ell_minus_one: self.mixed_gamma(sol, ell - 1.0, ell - 1.0, exec),
            trace_l2: self.mixed_gamma(sol, 2.0, 2.0, exec),
            ell,
            sup,
            inf,
            sup_abs: sup.abs().max(inf.abs()),
            sup_gamma: if sup_gamma.is_finite() { sup_gamma } else { 0.0 },
            mixed: requests.iter().map(|&(a, b)| [a, b, self.mixed(sol, a, b, exec)]).collect(),
        }
    }
}

pub fn norms(sol: &DiscreteSolution, spec: &ProblemSpec, mesh: &Mesh, requests: &[(f64, f64)], quad_points: usize, exec: Exec) -> NormReport {
    NormEvaluator::new(mesh, quad_points).report(sol, spec.p, spec.law.ell, requests, exec)
}

// ---------------------------------------------------------------------------
// Conservation and energy
// ---------------------------------------------------------------------------

/// Per-step residual of `(∫u^k - ∫u^{k-1})/dt + ∫_Γ b(u)u - ∫f - ∫_Γ h`.
pub fn mass_balance(sol: &DiscreteSolution, spec: &ProblemSpec, mesh: &Mesh, opts: &SolverOptions) -> Vec<f64> {
    let asm = Assembler::new(spec, mesh, *opts);
    let m = asm.lumped_mass();
    let mass: Vec<f64> = sol
        .states
        .iter()
        .map(|u| u.iter().zip(m).map(|(a, b)| a * b).collect::<NeumaierSum>().value())
        .collect();
    (1..sol.states.len())
        .map(|k| {
            let t = sol.times[k];
            let f: f64 = asm.source_load(t).into_iter().collect::<NeumaierSum>().value();
            let h: f64 = asm.boundary_load(t).into_iter().collect::<NeumaierSum>().value();
            (mass[k] - mass[k - 1]) / sol.dt + asm.boundary_flux(&sol.states[k]) - f - h
        })
        .collect()
}

/// Both sides of the discrete energy inequality
/// `½|u^K|² + a_# Σ dt ‖∇u^k‖² + b_# Σ dt Σ_Γ w|u^k|^ℓ ≤ ½|u^0|² + Σ dt (F^k + H^k)·u^k`
/// with lumped `|·|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
}

pub fn energy_ledger(sol: &DiscreteSolution, spec: &ProblemSpec, mesh: &Mesh, opts: &SolverOptions) -> EnergyLedger {
    let asm = Assembler::new(spec, mesh, *opts);
    let m = asm.lumped_mass();
    let half_sq = |u: &[f64]| 0.5 * u.iter().zip(m).map(|(a, b)| b * a * a).collect::<NeumaierSum>().value();
    let (a, b, ell) = (spec.diffusion.a_lower, spec.law.b_lower, spec.law.ell);
    let mut lhs = NeumaierSum::default();
    let mut rhs = NeumaierSum::default();
    lhs.add(half_sq(sol.final_state()));
    rhs.add(half_sq(&sol.states[0]));
    for k in 1..sol.states.len() {
        let u = &sol.states[k];
        let t = sol.times[k];
        lhs.add(sol.dt * a * gradient_norm(mesh, u, 2.0).powi(2));
        lhs.add(sol.dt * b * asm.boundary_power(u, ell));
        let f = asm.source_load(t);
        let h = asm.boundary_load(t);
        rhs.add(sol.dt * u.iter().zip(f.iter().zip(&h)).map(|(ui, (fi, hi))| ui * (fi + hi)).collect::<NeumaierSum>().value());
    }
    let (l, r) = (lhs.value(), rhs.value());
    EnergyLedger {
        lhs: l,
        rhs: r,
        slack: r - l,
    }
}

/// `(Σ_k dt ‖u^k - u*(t_k)‖²)^{1/2}`
pub fn l2_error(sol: &DiscreteSolution, mesh: &Mesh, exact: impl Fn(&[f64], f64) -> f64 + Sync, quad_points: usize) -> f64 {
    let q = QuadSet::cells(mesh, quad_points);
    let n = mesh.dim;
    let mut s = NeumaierSum::default();
    for k in 1..sol.states.len() {
        let t = sol.times[k];
        let u = &sol.states[k];
        for i in 0..q.len() {
            let d = q.value(i, u) - exact(&q.points[i][..n], t);
            s.add(sol.dt * q.weights[i] * d * d);
        }
    }
    s.value().sqrt()
}

/// Largest nodal gradient magnitude, used by diagnostics.
pub fn max_gradient(mesh: &Mesh, u: &[f64]) -> f64 {
    (0..mesh.n_cells()).fold(0.0, |m, c| m.max(cell_gradient(mesh, c, u).iter().map(|x| x * x).sum::<f64>().sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_box_mesh_divisions, DomainSpec, GammaSelector};
    use crate::problem::{
        BoundaryLaw, DiffusionField, DriftField, ProblemData, ScalarField, SpaceProfile, TimeProfile, VectorField,
    };
    use approx::assert_relative_eq;

    fn spec(law: BoundaryLaw, data: ProblemData) -> ProblemSpec {
        ProblemSpec {
            domain: DomainSpec::unit_square(GammaSelector::faces(&["left", "right"]), 0.5),
            diffusion: DiffusionField::identity(2),
            drift: DriftField {
                field: VectorField::zero(),
                q: 8.0,
                r: 8.0,
                theta: None,
            },
            law,
            data,
            p: 1.2,
            two_star: 4.0,
        }
    }

    fn mesh(s: &ProblemSpec, k: usize) -> Mesh {
        build_box_mesh_divisions(&s.domain, &[k, k]).unwrap()
    }

    fn opts(dt: f64) -> SolverOptions {
        SolverOptions {
            dt,
            ..Default::default()
        }
    }

    #[test]
    fn projection_reproduces_constants() {
        let s = spec(BoundaryLaw::neumann(), ProblemData {
            u0: ScalarField::constant(3.0),
            ..Default::default()
        });
        let m = mesh(&s, 4);
        for v in project_initial(&s, &m, 3) {
            assert_relative_eq!(v, 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn projection_of_linear_data_is_exact_at_interior_nodes() {
        let s = spec(BoundaryLaw::neumann(), ProblemData {
            u0: ScalarField::new(
                SpaceProfile::Affine {
                    coeffs: vec![2.0, -1.0],
                    offset: 0.5,
                },
                TimeProfile::Constant,
                1.0,
            ),
            ..Default::default()
        });
        let m = mesh(&s, 4);
        let u = project_initial(&s, &m, 3);
        for (i, x) in m.vertices.iter().enumerate() {
            let interior = (0..2).all(|d| x[d] > 1e-12 && x[d] < 1.0 - 1e-12);
            if interior {
                assert_relative_eq!(u[i], 2.0 * x[0] - x[1] + 0.5, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn projection_of_step_averages_across_the_jump() {
        // One cube, two triangles; u0 = 1 for x > 1/2 else 0.
        let s = spec(BoundaryLaw::neumann(), ProblemData {
            u0: ScalarField::new(
                SpaceProfile::Step {
                    axis: 0,
                    at: 0.5,
                    below: 0.0,
                    above: 1.0,
                },
                TimeProfile::Constant,
                1.0,
            ),
            ..Default::default()
        });
        let m = mesh(&s, 1);
        let u = project_initial(&s, &m, 8);
        // ∫ u0 φ_i / ∫ φ_i with ∫ φ_i = (patch area)/3, computed by hand on each patch.
        let q = QuadSet::cells(&m, 8);
        for i in 0..m.n_vertices() {
            let mut num = 0.0;
            let mut den = 0.0;
            for sidx in 0..q.len() {
                for a in 0..q.arity {
                    if q.nodes[sidx][a] == i {
                        let x = q.points[sidx][0];
                        num += q.weights[sidx] * q.shape[sidx][a] * if x > 0.5 { 1.0 } else { 0.0 };
                        den += q.weights[sidx] * q.shape[sidx][a];
                    }
                }
            }
            assert_relative_eq!(u[i], num / den, epsilon = 1e-12);
            assert!(u[i] > 0.0 && u[i] < 1.0);
        }
    }

    #[test]
    fn neumann_constant_is_steady() {
        let s = spec(BoundaryLaw::neumann(), ProblemData {
            u0: ScalarField::constant(2.5),
            ..Default::default()
        });
        let m = mesh(&s, 6);
        let sol = solve(&s, &m, &opts(0.1)).unwrap();
        assert_eq!(sol.states.len(), 6);
        for u in &sol.states {
            for v in u {
                assert_relative_eq!(*v, 2.5, max_relative = 1e-12);
            }
        }
        let nr = norms(&sol, &s, &m, &[(2.0, 2.0)], 3, Exec::Sequential);
        assert_relative_eq!(nr.l2_linf, 2.5, max_relative = 1e-12);
        // ‖c‖_{2,2,Q_T} = |c| |Ω|^{1/2} T^{1/2}
        assert_relative_eq!(nr.mixed[0][2], 2.5 * 0.5f64.sqrt(), max_relative = 1e-12);
        for r in mass_balance(&sol, &s, &m, &opts(0.1)) {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn step_count_and_grid() {
        let mut s = spec(BoundaryLaw::robin(1.0), ProblemData {
            u0: ScalarField::constant(1.0),
            ..Default::default()
        });
        s.domain.time_horizon = 1.0;
        let m = mesh(&s, 4);
        let sol = solve(&s, &m, &opts(0.1)).unwrap();
        assert_eq!(sol.n_steps(), 10);
        assert_eq!(sol.times.len(), 11);
        assert!(sol.steps.iter().all(|i| i.iterations == 1));
        assert!(opts(0.3).steps(1.0).is_err());
    }

    #[test]
    fn robin_sink_decreases_mass() {
        let s = spec(BoundaryLaw::robin(1.0), ProblemData {
            u0: ScalarField::constant(1.0),
            ..Default::default()
        });
        let m = mesh(&s, 6);
        let sol = solve(&s, &m, &opts(0.05)).unwrap();
        let ev = NormEvaluator::new(&m, 3);
        let mass: Vec<f64> = sol.states.iter().map(|u| ev.integral(u)).collect();
        assert!(mass.windows(2).all(|w| w[1] < w[0]));
        for r in mass_balance(&sol, &s, &m, &opts(0.05)) {
            assert!(r.abs() < 1e-10, "{r}");
        }
    }

    #[test]
    fn nonnegative_flux_increases_mass() {
        let s = spec(BoundaryLaw::neumann(), ProblemData {
            u0: ScalarField::constant(1.0),
            h: ScalarField::constant(0.3),
            ..Default::default()
        });
        let m = mesh(&s, 6);
        let sol = solve(&s, &m, &opts(0.05)).unwrap();
        let ev = NormEvaluator::new(&m, 3);
        let mass: Vec<f64> = sol.states.iter().map(|u| ev.integral(u)).collect();
        assert!(mass.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn blackbody_picard_converges_and_balances() {
        let s = spec(BoundaryLaw::blackbody(0.5), ProblemData {
            u0: ScalarField::constant(1.5),
            h: ScalarField::constant(0.2),
            ..Default::default()
        });
        let m = mesh(&s, 8);
        let o = opts(0.05);
        let sol = solve(&s, &m, &o).unwrap();
        assert!(sol.steps.iter().all(|i| i.iterations > 1 && i.residual <= 1e-12));
        for r in mass_balance(&sol, &s, &m, &o) {
            assert!(r.abs() < 1e-9, "{r}");
        }
        let e = energy_ledger(&sol, &s, &m, &o);
        assert!(e.slack > -1e-9, "{e:?}");
    }

    #[test]
    fn truncation_changes_drift_only_when_it_bites() {
        let mut s = spec(BoundaryLaw::robin(1.0), ProblemData {
            u0: ScalarField::constant(5.0),
            h: ScalarField::new(SpaceProfile::CosProduct { wavenumber: 1.0 }, TimeProfile::Constant, 1.0),
            ..Default::default()
        });
        s.drift.field = VectorField::constant(vec![4.0, 1.0]);
        let m = mesh(&s, 6);
        let base = solve(&s, &m, &opts(0.05)).unwrap();
        let one = solve(&s, &m, &SolverOptions {
            truncation: Truncation::Level(1),
            ..opts(0.05)
        })
        .unwrap();
        let diff = base.final_state().iter().zip(one.final_state()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff > 1e-3);
        let big = solve(&s, &m, &SolverOptions {
            truncation: Truncation::Level(100),
            ..opts(0.05)
        })
        .unwrap();
        let diff = base.final_state().iter().zip(big.final_state()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn regularized_source_is_dominated() {
        let t = Truncation::Level(2);
        for f in [-10.0, -1.0, 0.0, 0.5, 3.0, 1e6] {
            let g = t.regularize_source(f);
            assert!(g.abs() <= 2f64.min(f.abs()) + 1e-15);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let mut s = spec(BoundaryLaw::blackbody(0.3), ProblemData {
            u0: ScalarField::constant(1.0),
            h: ScalarField::constant(0.1),
            ..Default::default()
        });
        s.drift.field = VectorField::constant(vec![0.5, -0.2]);
        let m = mesh(&s, 6);
        let a = solve(&s, &m, &SolverOptions {
            exec: Exec::Sequential,
            ..opts(0.05)
        })
        .unwrap();
        let b = solve(&s, &m, &SolverOptions {
            exec: Exec::Parallel,
            ..opts(0.05)
        })
        .unwrap();
        assert_eq!(a, b);
    }
}
