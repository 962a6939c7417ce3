//! Sobolev and trace embedding constants with provenance.
//!
//! Norm conventions (used consistently by the estimator and the bounds):
//! the W^{1,p} norm is `‖∇v‖_p + ‖v‖_p`; the V_{p,q} norm adds `‖v‖_{q,Γ}`.
//!
//! | kind   | target                       | source        |
//! |--------|------------------------------|---------------|
//! | `S_p`  | `L^{p*}(Ω)`, `p* = np/(n-p)` | W^{1,p}       |
//! | `S_1`  | `L^{n/(n-1)}(Ω)`             | W^{1,1}       |
//! | `S_pq` | `L^{p*}(Ω)` (`L^{2p}` if p ≥ n) | V_{p,q}    |
//! | `K_p`  | `L^{p_*}(Γ)`, `p_* = p(n-1)/(n-p)` | W^{1,p} |
//! | `C_inf`| `L^∞(Ω)`, p > n              | W^{1,p}       |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, Mesh};
use crate::error::{precondition, Error, Result};
use crate::exec::Exec;
use crate::fem::{gradient_norm, gradient_norm_with_grad, h1_lumped, LinearSolver, QuadSet, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstantKind {
    #[serde(rename = "S_p")]
    Sp,
    #[serde(rename = "S_pq")]
    Spq,
    #[serde(rename = "K_p")]
    Kp,
    #[serde(rename = "S_1")]
    S1,
    #[serde(rename = "C_inf")]
    Cinf,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 5] = [
        ConstantKind::Sp,
        ConstantKind::Spq,
        ConstantKind::Kp,
        ConstantKind::S1,
        ConstantKind::Cinf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::Sp => "S_p",
            ConstantKind::Spq => "S_pq",
            ConstantKind::Kp => "K_p",
            ConstantKind::S1 => "S_1",
            ConstantKind::Cinf => "C_inf",
        }
    }

    pub fn uses_q(self) -> bool {
        self == ConstantKind::Spq
    }

    /// Integrability exponent of the target space.
    pub fn target_exponent(self, p: f64, n: usize) -> f64 {
        match self {
            ConstantKind::Sp => sobolev_exponent(p, n),
            ConstantKind::S1 => sobolev_exponent(1.0, n),
            ConstantKind::Spq => {
                if p < n as f64 {
                    sobolev_exponent(p, n)
                } else {
                    2.0 * p
                }
            }
            ConstantKind::Kp => trace_exponent(p, n),
            ConstantKind::Cinf => f64::INFINITY,
        }
    }

    fn check_params(self, p: f64, n: usize) -> Result<()> {
        let nf = n as f64;
        let ok = match self {
            ConstantKind::Sp | ConstantKind::Kp => (1.0..nf).contains(&p),
            ConstantKind::S1 => p == 1.0,
            ConstantKind::Spq => p >= 1.0,
            ConstantKind::Cinf => p > nf,
        };
        if ok {
            Ok(())
        } else {
            Err(precondition(
                "sobolev",
                format!("{} is not defined for p = {p} in dimension {n}", self.name()),
            ))
        }
    }
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConstantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown constant kind `{s}`")))
    }
}

/// `p* = np/(n-p)` (infinite for p ≥ n).
pub fn sobolev_exponent(p: f64, n: usize) -> f64 {
    let n = n as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

/// `p_* = p(n-1)/(n-p)` (infinite for p ≥ n).
pub fn trace_exponent(p: f64, n: usize) -> f64 {
    let n = n as f64;
    if p < n {
        p * (n - 1.0) / (n - p)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    UserSupplied,
    AnalyticUpper,
    /// Twice a numeric lower estimate; bound checks that use it are conditional.
    Fallback,
    NumericLower,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::UserSupplied => "user-supplied",
            Provenance::AnalyticUpper => "analytic-upper",
            Provenance::Fallback => "fallback",
            Provenance::NumericLower => "numeric-lower",
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Provenance::UserSupplied | Provenance::AnalyticUpper)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Provenance::UserSupplied,
            Provenance::AnalyticUpper,
            Provenance::Fallback,
            Provenance::NumericLower,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown provenance `{s}`")))
    }
}

pub const FALLBACK_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub value: f64,
    pub provenance: Provenance,
    /// False when the estimator hit its iteration cap.
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

impl ConstantEstimate {
    pub fn new(kind: ConstantKind, p: f64, q: Option<f64>, value: f64, provenance: Provenance) -> Self {
        ConstantEstimate {
            kind,
            p,
            q: if kind.uses_q() { q } else { None },
            value,
            provenance,
            converged: true,
        }
    }

    fn matches(&self, kind: ConstantKind, p: f64, q: Option<f64>) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.kind == kind
            && close(self.p, p)
            && (!kind.uses_q()
                || match (self.q, q) {
                    (Some(a), Some(b)) => close(a, b),
                    (None, None) => true,
                    _ => false,
                })
    }

    pub fn label(&self) -> String {
        match self.q {
            Some(q) => format!("{}(p={}, q={})", self.kind, self.p, q),
            None => format!("{}(p={})", self.kind, self.p),
        }
    }
}

// ---------------------------------------------------------------------------
// Analytic upper bounds on boxes
// ---------------------------------------------------------------------------

/// Constant of `‖v‖_{n/(n-1)} ≤ C (‖∇v‖_1 + ‖v‖_1)` on a box, from the
/// one-dimensional estimate along coordinate lines, Gagliardo's product
/// inequality and the arithmetic-geometric mean inequality.
fn box_s1(extents: &[f64]) -> f64 {
    let n = extents.len() as f64;
    let inv: f64 = extents.iter().map(|l| 1.0 / l).sum();
    inv.max(n.sqrt()) / n
}

/// Constant of `‖v‖_{1,Γ} ≤ K (‖∇v‖_1 + ‖v‖_1)` when Γ is a union of faces.
fn box_k1(domain: &DomainSpec) -> Result<f64> {
    let n = domain.dim();
    let mut count = vec![0usize; n];
    for f in domain.gamma_faces()? {
        count[f.axis] += 1;
    }
    let inv: f64 = count.iter().zip(&domain.extents).map(|(c, l)| *c as f64 / l).sum();
    let axes = count.iter().filter(|c| **c > 0).count() as f64;
    Ok(inv.max(axes.sqrt()))
}

/// Upper bound for the requested constant on a box, when one is available.
pub fn analytic_upper(domain: &DomainSpec, kind: ConstantKind, p: f64, _q: Option<f64>) -> Result<Option<f64>> {
    let n = domain.dim();
    kind.check_params(p, n)?;
    let nf = n as f64;
    let c1 = box_s1(&domain.extents);
    // ‖v‖_{p*} ≤ c1 γ (‖∇v‖_p + ‖v‖_p), from the p = 1 case applied to |v|^γ.
    let sp = |p: f64| c1 * p * (nf - 1.0) / (nf - p);
    Ok(match kind {
        ConstantKind::S1 => Some(c1),
        ConstantKind::Sp => Some(sp(p)),
        ConstantKind::Kp => {
            let gamma = trace_exponent(p, n);
            let k1 = box_k1(domain)?;
            Some((k1 * gamma * sp(p).powf(gamma - 1.0)).powf(1.0 / gamma))
        }
        ConstantKind::Spq => {
            if p < nf {
                Some(sp(p))
            } else {
                // Pass through W^{1,s} with s* = 2p and Hölder on Ω.
                let s = 2.0 * p * nf / (nf + 2.0 * p);
                Some(sp(s) * domain.volume().powf(1.0 / s - 1.0 / p))
            }
        }
        ConstantKind::Cinf => None,
    })
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevRegistry {
    pub fingerprint: String,
    pub entries: Vec<ConstantEstimate>,
}

impl SobolevRegistry {
    pub fn new(domain: &DomainSpec) -> Self {
        SobolevRegistry {
            fingerprint: Self::fingerprint_of(domain),
            entries: Vec::new(),
        }
    }

    pub fn fingerprint_of(domain: &DomainSpec) -> String {
        let ext: Vec<String> = domain.extents.iter().map(|l| format!("{l}")).collect();
        let faces: Vec<String> = domain
            .gamma_faces()
            .map(|fs| fs.iter().map(|f| f.to_string()).collect())
            .unwrap_or_default();
        format!("box[{}];gamma[{}]", ext.join(","), faces.join(","))
    }

    pub fn check_domain(&self, domain: &DomainSpec) -> Result<()> {
        let fp = Self::fingerprint_of(domain);
        if fp != self.fingerprint {
            return Err(Error::Config(format!(
                "registry built for {} but the active domain is {fp}",
                self.fingerprint
            )));
        }
        Ok(())
    }

    /// Adds or replaces the entry with the same key and provenance.
    pub fn insert(&mut self, e: ConstantEstimate) -> Result<()> {
        if !(e.value.is_finite() && e.value > 0.0) {
            return Err(Error::Config(format!("{} must be positive and finite, got {}", e.label(), e.value)));
        }
        self.entries
            .retain(|x| !(x.provenance == e.provenance && x.matches(e.kind, e.p, e.q)));
        self.entries.push(e);
        self.entries.sort_by(|a, b| {
            (a.kind, a.provenance)
                .cmp(&(b.kind, b.provenance))
                .then(a.p.total_cmp(&b.p))
                .then(a.q.unwrap_or(0.0).total_cmp(&b.q.unwrap_or(0.0)))
        });
        Ok(())
    }

    pub fn insert_user(&mut self, kind: ConstantKind, p: f64, q: Option<f64>, value: f64) -> Result<()> {
        self.insert(ConstantEstimate::new(kind, p, q, value, Provenance::UserSupplied))
    }

    /// Adds the analytic upper bound for the key if one exists.
    pub fn add_analytic(&mut self, domain: &DomainSpec, kind: ConstantKind, p: f64, q: Option<f64>) -> Result<bool> {
        match analytic_upper(domain, kind, p, q)? {
            Some(v) => {
                self.insert(ConstantEstimate::new(kind, p, q, v, Provenance::AnalyticUpper))?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn candidates(&self, kind: ConstantKind, p: f64, q: Option<f64>) -> impl Iterator<Item = &ConstantEstimate> {
        self.entries.iter().filter(move |e| e.matches(kind, p, q))
    }

    /// Best entry for the key: user-supplied, then analytic-upper, then numeric-lower.
    pub fn lookup(&self, kind: ConstantKind, p: f64, q: Option<f64>) -> Result<ConstantEstimate> {
        self.candidates(kind, p, q)
            .min_by_key(|e| e.provenance)
            .cloned()
            .ok_or_else(|| Error::MissingConstant {
                kind: kind.name().to_string(),
                p,
                q: q.unwrap_or(f64::NAN),
            })
    }

    /// Entry usable as an upper bound. A numeric-lower entry is turned into a
    /// fallback of twice its value.
    pub fn lookup_upper(&self, kind: ConstantKind, p: f64, q: Option<f64>) -> Result<ConstantEstimate> {
        let mut e = self.lookup(kind, p, q)?;
        if e.provenance == Provenance::NumericLower {
            e.value *= FALLBACK_FACTOR;
            e.provenance = Provenance::Fallback;
        }
        Ok(e)
    }

    /// Keys whose numeric lower estimate exceeds an upper entry.
    pub fn consistency(&self) -> Vec<String> {
        let mut out = Vec::new();
        for lo in self.entries.iter().filter(|e| e.provenance == Provenance::NumericLower) {
            for up in self.candidates(lo.kind, lo.p, lo.q).filter(|e| e.provenance.is_upper()) {
                if lo.value > up.value * (1.0 + 1e-9) {
                    out.push(format!(
                        "{}: numeric-lower {:.6e} exceeds {} {:.6e}",
                        lo.label(),
                        lo.value,
                        up.provenance,
                        up.value
                    ));
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("# domain {}\nkind\tp\tq\tvalue\tprovenance\tconverged\n", self.fingerprint);
        for e in &self.entries {
            let q = e.q.map(|q| format!("{q:e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{}\t{:e}\t{}\t{:e}\t{}\t{}\n",
                e.kind, e.p, q, e.value, e.provenance, e.converged
            ));
        }
        s
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut fingerprint = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# domain ") {
                fingerprint = Some(rest.trim().to_string());
                continue;
            }
            if line.is_empty() || line.starts_with('#') || line.starts_with("kind") {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() < 5 {
                return Err(Error::Config(format!("registry line {}: expected 5 columns", lineno + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("registry line {}: bad number `{s}`", lineno + 1)))
            };
            let kind: ConstantKind = cols[0].parse()?;
            let q = if cols[2] == "-" { None } else { Some(num(cols[2])?) };
            let mut e = ConstantEstimate::new(kind, num(cols[1])?, q, num(cols[3])?, cols[4].parse()?);
            e.converged = cols.get(5).map(|c| *c != "false").unwrap_or(true);
            entries.push(e);
        }
        let mut reg = SobolevRegistry {
            fingerprint: fingerprint.ok_or_else(|| Error::Config("registry table has no domain line".into()))?,
            entries: Vec::new(),
        };
        for e in entries {
            reg.insert(e)?;
        }
        Ok(reg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Discrete quotients and the estimator
// ---------------------------------------------------------------------------

/// Target and source norms of one embedding over a P1 space.
pub struct Quotient<'a> {
    mesh: &'a Mesh,
    pub kind: ConstantKind,
    pub p: f64,
    pub q: Option<f64>,
    target: f64,
    cells: QuadSet,
    gamma: QuadSet,
}

impl<'a> Quotient<'a> {
    pub fn new(mesh: &'a Mesh, kind: ConstantKind, p: f64, q: Option<f64>, quad_points: usize) -> Result<Self> {
        kind.check_params(p, mesh.dim)?;
        if kind == ConstantKind::Spq && q.is_none() {
            return Err(precondition("sobolev", "S_pq needs a trace exponent q"));
        }
        let p = if kind == ConstantKind::S1 { 1.0 } else { p };
        Ok(Quotient {
            mesh,
            kind,
            p,
            q,
            target: kind.target_exponent(p, mesh.dim),
            cells: QuadSet::cells(mesh, quad_points),
            gamma: QuadSet::gamma(mesh, quad_points),
        })
    }

    pub fn target_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            ConstantKind::Kp => self.gamma.lp_norm(v, self.target),
            ConstantKind::Cinf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            _ => self.cells.lp_norm(v, self.target),
        }
    }

    pub fn source_norm(&self, v: &[f64]) -> f64 {
        let mut s = gradient_norm(self.mesh, v, self.p) + self.cells.lp_norm(v, self.p);
        if let (ConstantKind::Spq, Some(q)) = (self.kind, self.q) {
            s += self.gamma.lp_norm(v, q);
        }
        s
    }

    /// `‖v‖_target / ‖v‖_source`
    pub fn value(&self, v: &[f64]) -> f64 {
        let s = self.source_norm(v);
        if s == 0.0 {
            0.0
        } else {
            self.target_norm(v) / s
        }
    }

    /// `log` of the quotient and its gradient.
    fn log_value_grad(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let n = v.len();
        let mut gt = vec![0.0; n];
        let t = match self.kind {
            ConstantKind::Kp => self.gamma.lp_norm_with_grad(v, self.target, 1.0, &mut gt),
            ConstantKind::Cinf => {
                let (i, m) = v
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |(bi, bm), (i, x)| if x.abs() > bm { (i, x.abs()) } else { (bi, bm) });
                gt[i] = v[i].signum();
                m
            }
            _ => self.cells.lp_norm_with_grad(v, self.target, 1.0, &mut gt),
        };
        let mut gs = vec![0.0; n];
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let eps = 1e-10 * scale.max(1e-300);
        let mut s = gradient_norm_with_grad(self.mesh, v, self.p, eps, 1.0, &mut gs);
        s += self.cells.lp_norm_with_grad(v, self.p, 1.0, &mut gs);
        if let (ConstantKind::Spq, Some(q)) = (self.kind, self.q) {
            s += self.gamma.lp_norm_with_grad(v, q, 1.0, &mut gs);
        }
        for i in 0..n {
            grad[i] = gt[i] / t - gs[i] / s;
        }
        t.ln() - s.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub iterations: usize,
    pub random_starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub quad_points: usize,
    pub exec: Exec,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            iterations: 200,
            random_starts: 4,
            seed: 0,
            tol: 1e-10,
            quad_points: 4,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub estimate: ConstantEstimate,
    /// Nodal values of the best trial function.
    pub argmax: Vec<f64>,
    pub iterations: usize,
}

struct Ascent {
    v: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ascend(quot: &Quotient, precond: &LinearSolver, gram: &Triplets, start: Vec<f64>, opts: &EstimatorOptions) -> Result<Ascent> {
    let n = start.len();
    let mut v = start;
    let mut grad = vec![0.0; n];
    let mut j = quot.log_value_grad(&v, &mut grad);
    if !j.is_finite() {
        return Ok(Ascent {
            v,
            value: 0.0,
            iterations: 0,
            converged: false,
        });
    }
    let mut step = 0.25;
    let mut converged = false;
    let mut it = 0;
    while it < opts.iterations {
        it += 1;
        let d = precond.solve(&grad)?;
        let dn = dot(&d, &gram.apply(&d)).sqrt();
        let vn = dot(&v, &gram.apply(&v)).sqrt();
        if dn == 0.0 || vn == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        while step > 1e-10 {
            let trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + step * vn / dn * b).collect();
            let mut g = vec![0.0; n];
            let jt = quot.log_value_grad(&trial, &mut g);
            if jt.is_finite() && jt > j {
                accepted = Some((trial, jt, g));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, jt, g)) = accepted else {
            converged = true;
            break;
        };
        let gain = jt - j;
        let norm = quot.source_norm(&trial);
        v = trial.iter().map(|x| x / norm).collect();
        // the quotient is scale invariant, so the gradient scales inversely
        grad = g.iter().map(|x| x * norm).collect();
        j = jt;
        step = (step * 2.0).min(1.0);
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(Ascent {
        value: j.exp(),
        v,
        iterations: it,
        converged,
    })
}

/// Numerical lower estimate of an embedding constant: the largest discrete
/// quotient found by preconditioned gradient ascent from several starts.
/// `warm` may hold a previous maximizer on this mesh.
pub fn estimate_rayleigh(
    mesh: &Mesh,
    kind: ConstantKind,
    p: f64,
    q: Option<f64>,
    opts: &EstimatorOptions,
    warm: Option<&[f64]>,
) -> Result<EstimateOutcome> {
    let quot = Quotient::new(mesh, kind, p, q, opts.quad_points)?;
    let gram = h1_lumped(mesh);
    let precond = LinearSolver::from_triplets(&gram)?;
    let nv = mesh.n_vertices();

    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; nv]];
    for d in 0..mesh.dim {
        let l = mesh.extents[d];
        starts.push(mesh.vertices.iter().map(|x| 1.0 + 0.5 * (std::f64::consts::PI * x[d] / l).cos()).collect());
    }
    let mass = mesh.lumped_mass();
    for i in 0..opts.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        let raw: Vec<f64> = (0..nv).map(|k| mass[k] * rng.gen_range(-1.0..1.0)).collect();
        let mut smooth = precond.solve(&raw)?;
        let shift = rng.gen_range(-1.0..1.0) * smooth.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        smooth.iter_mut().for_each(|x| *x += shift);
        starts.push(smooth);
    }
    if let Some(w) = warm {
        if w.len() == nv {
            starts.push(w.to_vec());
        }
    }

    let runs = opts.exec.map(&starts, |s| ascend(&quot, &precond, &gram, s.clone(), opts));
    let mut best: Option<Ascent> = None;
    let mut total = 0;
    for r in runs {
        let r = r?;
        total += r.iterations;
        // Exact (unsmoothed) quotient of the final iterate.
        let exact = quot.value(&r.v);
        let r = Ascent { value: exact, ..r };
        if best.as_ref().map(|b| r.value > b.value).unwrap_or(true) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    if !(best.value.is_finite() && best.value > 0.0) {
        return Err(Error::NonFinite(format!("{} estimate", kind)));
    }
    let mut estimate = ConstantEstimate::new(kind, quot.p, q, best.value, Provenance::NumericLower);
    estimate.converged = best.converged;
    Ok(EstimateOutcome {
        estimate,
        argmax: best.v,
        iterations: total,
    })
}

/// Right-hand side of `‖v‖_{p*,Ω} ≤ S_p ‖∇v‖_p + S_1^{1/p_*} ‖v‖_{p_*,∂Ω}`.
pub fn boundary_sobolev_bound(sp: f64, s1: f64, p: f64, n: usize, grad_norm: f64, trace_norm: f64) -> Result<f64> {
    if p >= n as f64 || p < 1.0 {
        return Err(precondition("boundary_sobolev_bound", format!("needs 1 ≤ p < n, got p = {p}, n = {n}")));
    }
    if [sp, s1, grad_norm, trace_norm].iter().any(|x| *x < 0.0 || x.is_nan()) {
        return Err(precondition("boundary_sobolev_bound", "inputs must be nonnegative"));
    }
    Ok(sp * grad_norm + s1.powf(1.0 / trace_exponent(p, n)) * trace_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_box_mesh_divisions, GammaSelector};
    use approx::assert_relative_eq;

    fn unit(gamma: &[&str]) -> DomainSpec {
        DomainSpec::unit_square(GammaSelector::faces(gamma), 1.0)
    }

    #[test]
    fn exponents() {
        assert_eq!(sobolev_exponent(1.0, 2), 2.0);
        assert_eq!(sobolev_exponent(2.0, 3), 6.0);
        assert_eq!(trace_exponent(1.0, 3), 1.0);
        assert_eq!(trace_exponent(2.0, 3), 4.0);
        assert_eq!(ConstantKind::Spq.target_exponent(2.0, 2), 4.0);
    }

    #[test]
    fn user_value_passes_through() {
        let d = unit(&["left"]);
        let mut reg = SobolevRegistry::new(&d);
        reg.add_analytic(&d, ConstantKind::Sp, 1.0, None).unwrap();
        reg.insert_user(ConstantKind::Sp, 1.0, None, 1.0).unwrap();
        let e = reg.lookup(ConstantKind::Sp, 1.0, None).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.provenance, Provenance::UserSupplied);
    }

    #[test]
    fn missing_constant_is_an_error() {
        let reg = SobolevRegistry::new(&unit(&["left"]));
        let err = reg.lookup(ConstantKind::Kp, 1.2, None).unwrap_err();
        assert!(matches!(err, Error::MissingConstant { ref kind, p, .. } if kind == "K_p" && p == 1.2));
    }

    #[test]
    fn fallback_doubles_numeric_lower() {
        let d = unit(&["left"]);
        let mut reg = SobolevRegistry::new(&d);
        reg.insert(ConstantEstimate::new(ConstantKind::Kp, 1.2, None, 0.7, Provenance::NumericLower))
            .unwrap();
        let e = reg.lookup_upper(ConstantKind::Kp, 1.2, None).unwrap();
        assert_eq!(e.provenance, Provenance::Fallback);
        assert_relative_eq!(e.value, 1.4);
    }

    #[test]
    fn analytic_values_on_unit_square() {
        let d = unit(&["left"]);
        assert_relative_eq!(analytic_upper(&d, ConstantKind::S1, 1.0, None).unwrap().unwrap(), 1.0);
        // γ = p(n-1)/(n-p) = 1.5/0.5
        assert_relative_eq!(analytic_upper(&d, ConstantKind::Sp, 1.5, None).unwrap().unwrap(), 3.0);
        // one face: K_1 = max(1, 1) = 1
        assert_relative_eq!(analytic_upper(&d, ConstantKind::Kp, 1.0, None).unwrap().unwrap(), 1.0);
        let all = DomainSpec::unit_square(GammaSelector::all(), 1.0);
        assert_relative_eq!(analytic_upper(&all, ConstantKind::Kp, 1.0, None).unwrap().unwrap(), 4.0);
        assert!(analytic_upper(&d, ConstantKind::Cinf, 3.0, None).unwrap().is_none());
        assert!(analytic_upper(&d, ConstantKind::Sp, 2.0, None).is_err());
    }

    #[test]
    fn table_round_trip() {
        let d = unit(&["left", "top"]);
        let mut reg = SobolevRegistry::new(&d);
        reg.add_analytic(&d, ConstantKind::Kp, 1.2, None).unwrap();
        reg.add_analytic(&d, ConstantKind::Spq, 2.0, Some(3.0)).unwrap();
        reg.insert(ConstantEstimate::new(ConstantKind::S1, 1.0, None, 0.123456789012345, Provenance::NumericLower))
            .unwrap();
        let text = reg.to_table();
        let back = SobolevRegistry::from_table(&text).unwrap();
        assert_eq!(back, reg);
        back.check_domain(&d).unwrap();
        assert!(back.check_domain(&unit(&["left"])).is_err());
    }

    #[test]
    fn consistency_flags_inverted_pairs() {
        let d = unit(&["left"]);
        let mut reg = SobolevRegistry::new(&d);
        reg.add_analytic(&d, ConstantKind::S1, 1.0, None).unwrap();
        reg.insert(ConstantEstimate::new(ConstantKind::S1, 1.0, None, 0.9, Provenance::NumericLower))
            .unwrap();
        assert!(reg.consistency().is_empty());
        reg.insert(ConstantEstimate::new(ConstantKind::S1, 1.0, None, 1.1, Provenance::NumericLower))
            .unwrap();
        assert_eq!(reg.consistency().len(), 1);
    }

    #[test]
    fn boundary_sobolev_examples() {
        assert_eq!(boundary_sobolev_bound(3.0, 2.0, 1.5, 2, 0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(boundary_sobolev_bound(1.0, 1.0, 1.5, 2, 0.7, 0.4).unwrap(), 1.1);
        assert_relative_eq!(boundary_sobolev_bound(2.0, 4.0, 1.0, 2, 1.0, 0.5).unwrap(), 4.0, max_relative = 1e-12);
        assert!(boundary_sobolev_bound(1.0, 1.0, 2.0, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_function_quotient_is_one_on_unit_square() {
        let d = unit(&["left"]);
        let m = build_box_mesh_divisions(&d, &[4, 4]).unwrap();
        let qt = Quotient::new(&m, ConstantKind::Sp, 1.5, None, 4).unwrap();
        assert_relative_eq!(qt.value(&vec![2.0; m.n_vertices()]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn estimate_beats_constant_and_stays_below_analytic() {
        let d = unit(&["left"]);
        let m = build_box_mesh_divisions(&d, &[6, 6]).unwrap();
        let opts = EstimatorOptions {
            iterations: 60,
            random_starts: 2,
            ..Default::default()
        };
        for (kind, p) in [(ConstantKind::Sp, 1.5), (ConstantKind::Kp, 1.2), (ConstantKind::S1, 1.0)] {
            let out = estimate_rayleigh(&m, kind, p, None, &opts, None).unwrap();
            let up = analytic_upper(&d, kind, p, None).unwrap().unwrap();
            assert!(out.estimate.value <= up * (1.0 + 1e-12), "{kind}: {} > {up}", out.estimate.value);
            let qt = Quotient::new(&m, kind, p, None, 4).unwrap();
            assert!(out.estimate.value >= qt.value(&vec![1.0; m.n_vertices()]) - 1e-12);
        }
    }

    #[test]
    fn estimator_is_deterministic() {
        let d = unit(&["left"]);
        let m = build_box_mesh_divisions(&d, &[4, 4]).unwrap();
        let opts = EstimatorOptions {
            iterations: 30,
            ..Default::default()
        };
        let a = estimate_rayleigh(&m, ConstantKind::Spq, 2.0, Some(2.0), &opts, None).unwrap();
        let b = estimate_rayleigh(&m, ConstantKind::Spq, 2.0, Some(2.0), &EstimatorOptions { exec: Exec::Sequential, ..opts }, None)
            .unwrap();
        assert_eq!(a.estimate.value.to_bits(), b.estimate.value.to_bits());
    }

    #[test]
    fn estimate_lands_in_registry() {
        let d = unit(&["left"]);
        let m = build_box_mesh_divisions(&d, &[4, 4]).unwrap();
        let mut reg = SobolevRegistry::new(&d);
        let ell = 2.0;
        let out = estimate_rayleigh(&m, ConstantKind::Spq, 2.0, Some(ell), &EstimatorOptions::default(), None).unwrap();
        reg.insert(out.estimate).unwrap();
        let e = reg.lookup(ConstantKind::Spq, 2.0, Some(ell)).unwrap();
        assert_eq!(e.provenance, Provenance::NumericLower);
    }
}
