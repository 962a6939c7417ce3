//! Coefficients, boundary laws, data and exponents of the parabolic problem,
//! together with assumption checks and the norms of the data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{BoxFace, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::quadrature::{NeumaierSum, TimeRule};

// ---------------------------------------------------------------------------
// Field presets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    #[default]
    Constant,
    /// `a + b t`
    Affine { a: f64, b: f64 },
    /// `exp(rate t)`
    Exp { rate: f64 },
    /// `cos(2π frequency t)`
    Cos { frequency: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Affine { a, b } => a + b * t,
            TimeProfile::Exp { rate } => (rate * t).exp(),
            TimeProfile::Cos { frequency } => (2.0 * PI * frequency * t).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceProfile {
    #[default]
    Zero,
    Constant,
    /// `Π_i cos(k π x_i)`
    CosProduct { wavenumber: f64 },
    /// `offset + Σ coeffs_i x_i`
    Affine { coeffs: Vec<f64>, offset: f64 },
    /// `exp(-|x - center|² / width²)`
    Gaussian { center: Vec<f64>, width: f64 },
    /// `below` for `x_axis < at`, `above` otherwise.
    Step { axis: usize, at: f64, below: f64, above: f64 },
    /// `mean + amplitude Π_i cos(k π x_i)`
    Cosine { mean: f64, amplitude: f64, wavenumber: f64 },
}

impl SpaceProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpaceProfile::Zero => 0.0,
            SpaceProfile::Constant => 1.0,
            SpaceProfile::CosProduct { wavenumber } => {
                x.iter().map(|xi| (wavenumber * PI * xi).cos()).product()
            }
            SpaceProfile::Affine { coeffs, offset } => {
                offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
            }
            SpaceProfile::Gaussian { center, width } => {
                let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c).powi(2)).sum();
                (-r2 / (width * width)).exp()
            }
            SpaceProfile::Step {
                axis,
                at,
                below,
                above,
            } => {
                if x[*axis] < *at {
                    *below
                } else {
                    *above
                }
            }
            SpaceProfile::Cosine {
                mean,
                amplitude,
                wavenumber,
            } => mean + amplitude * x.iter().map(|xi| (wavenumber * PI * xi).cos()).product::<f64>(),
        }
    }
}

/// Separable scalar field `scale · space(x) · time(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    #[serde(default)]
    pub space: SpaceProfile,
    #[serde(default)]
    pub time: TimeProfile,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ScalarField {
    fn default() -> Self {
        ScalarField::zero()
    }
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField {
            space: SpaceProfile::Zero,
            time: TimeProfile::Constant,
            scale: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField {
            space: SpaceProfile::Constant,
            time: TimeProfile::Constant,
            scale: value,
        }
    }

    pub fn new(space: SpaceProfile, time: TimeProfile, scale: f64) -> Self {
        ScalarField { space, time, scale }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.space.eval(x) * self.time.eval(t)
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.space == SpaceProfile::Zero
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ScalarField {
            scale: self.scale * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorProfile {
    #[default]
    Zero,
    Constant { value: Vec<f64> },
    /// Divergence-free cellular flow `(sin πx cos πy, -cos πx sin πy)`.
    Vortex,
    /// `(x_1 - c_1, -(x_0 - c_0))`
    Rotation { center: Vec<f64> },
}

impl VectorProfile {
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            VectorProfile::Zero => {}
            VectorProfile::Constant { value } => {
                for (o, v) in out.iter_mut().zip(value) {
                    *o = *v;
                }
            }
            VectorProfile::Vortex => {
                out[0] = (PI * x[0]).sin() * (PI * x[1]).cos();
                out[1] = -(PI * x[0]).cos() * (PI * x[1]).sin();
            }
            VectorProfile::Rotation { center } => {
                out[0] = x[1] - center[1];
                out[1] = -(x[0] - center[0]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    #[serde(default)]
    pub space: VectorProfile,
    #[serde(default)]
    pub time: TimeProfile,
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for VectorField {
    fn default() -> Self {
        VectorField::zero()
    }
}

impl VectorField {
    pub fn zero() -> Self {
        VectorField {
            space: VectorProfile::Zero,
            time: TimeProfile::Constant,
            scale: 0.0,
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        VectorField {
            space: VectorProfile::Constant { value },
            time: TimeProfile::Constant,
            scale: 1.0,
        }
    }

    pub fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        if self.is_zero() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        self.space.eval(x, out);
        let s = self.scale * self.time.eval(t);
        out.iter_mut().for_each(|o| *o *= s);
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.space == VectorProfile::Zero
    }

    pub fn scaled(&self, factor: f64) -> Self {
        VectorField {
            scale: self.scale * factor,
            ..self.clone()
        }
    }
}

/// Diffusion coefficient presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixField {
    Isotropic { value: f64 },
    Constant { matrix: Vec<Vec<f64>> },
    /// Two isotropic materials on a checkerboard of blocks of size `block`.
    Checkerboard { low: f64, high: f64, block: Vec<f64> },
}

impl MatrixField {
    pub fn eval(&self, x: &[f64], n: usize) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        match self {
            MatrixField::Isotropic { value } => {
                for (i, row) in a.iter_mut().enumerate().take(n) {
                    row[i] = *value;
                }
            }
            MatrixField::Constant { matrix } => {
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] = matrix[i][j];
                    }
                }
            }
            MatrixField::Checkerboard { low, high, block } => {
                let parity: i64 = (0..n).map(|i| (x[i] / block[i]).floor() as i64).sum();
                let v = if parity.rem_euclid(2) == 0 { *low } else { *high };
                for (i, row) in a.iter_mut().enumerate().take(n) {
                    row[i] = v;
                }
            }
        }
        a
    }

    /// Exact ellipticity and entry bounds of the preset.
    pub fn exact_bounds(&self, n: usize) -> (f64, f64) {
        match self {
            MatrixField::Isotropic { value } => (*value, value.abs()),
            MatrixField::Checkerboard { low, high, .. } => (low.min(*high), low.abs().max(high.abs())),
            MatrixField::Constant { .. } => {
                let a = self.eval(&[0.0; 3], n);
                let max = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                (min_sym_eigenvalue(&a, n), max)
            }
        }
    }

    pub fn is_isotropic(&self) -> bool {
        !matches!(self, MatrixField::Constant { .. })
    }
}

fn min_sym_eigenvalue(a: &[[f64; 3]; 3], n: usize) -> f64 {
    let s = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    s.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionField {
    pub field: MatrixField,
    pub a_lower: f64,
    pub a_upper: f64,
}

impl DiffusionField {
    /// Preset with its exact constants.
    pub fn exact(field: MatrixField, n: usize) -> Self {
        let (a_lower, a_upper) = field.exact_bounds(n);
        DiffusionField {
            field,
            a_lower,
            a_upper,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::exact(MatrixField::Isotropic { value: 1.0 }, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftField {
    pub field: VectorField,
    /// Spatial integrability exponent (> 2).
    pub q: f64,
    /// Temporal integrability exponent (> 1).
    pub r: f64,
    /// Only used when n = 2; defaults to the midpoint of `(0, 1 - 2/q)`.
    #[serde(default)]
    pub theta: Option<f64>,
}

impl DriftField {
    pub fn theta(&self, n: usize) -> f64 {
        if n > 2 {
            0.0
        } else {
            self.theta.unwrap_or(0.5 * (1.0 - 2.0 / self.q))
        }
    }
}

// ---------------------------------------------------------------------------
// Boundary law
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    Neumann,
    Robin { coefficient: f64 },
    /// Stefan-Boltzmann radiation `σ|u|³`.
    Blackbody { sigma: f64 },
    /// `b u⁴`
    Wien { coefficient: f64 },
    /// Power law `c|u|^{ℓ-2}` with arbitrary ℓ ≥ 2.
    Custom { coefficient: f64, ell: f64 },
}

impl LawKind {
    pub fn default_ell(&self) -> f64 {
        match self {
            LawKind::Neumann | LawKind::Robin { .. } => 2.0,
            LawKind::Blackbody { .. } => 5.0,
            LawKind::Wien { .. } => 6.0,
            LawKind::Custom { ell, .. } => *ell,
        }
    }

    fn coefficient(&self) -> f64 {
        match *self {
            LawKind::Neumann => 0.0,
            LawKind::Robin { coefficient } => coefficient,
            LawKind::Blackbody { sigma } => sigma,
            LawKind::Wien { coefficient } => coefficient,
            LawKind::Custom { coefficient, .. } => coefficient,
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            LawKind::Neumann => 0.0,
            LawKind::Robin { coefficient } => coefficient,
            LawKind::Blackbody { sigma } => sigma * xi.abs().powi(3),
            LawKind::Wien { coefficient } => coefficient * xi.powi(4),
            LawKind::Custom { coefficient, ell } => coefficient * xi.abs().powf(ell - 2.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            LawKind::Neumann | LawKind::Robin { .. } => true,
            LawKind::Custom { ell, .. } => *ell == 2.0,
            _ => false,
        }
    }
}

/// Serialized form of a boundary law; missing constants default to the
/// exact values of the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLawConfig {
    #[serde(flatten)]
    pub kind: LawKind,
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub b_lower: Option<f64>,
    #[serde(default)]
    pub b_upper: Option<f64>,
    /// Piecewise-constant-in-x multipliers per face (`left`, `x0-`, ...).
    #[serde(default)]
    pub face_multipliers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLaw {
    pub kind: LawKind,
    pub ell: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    pub face_multipliers: BTreeMap<BoxFace, f64>,
}

impl BoundaryLaw {
    pub fn new(kind: LawKind) -> Self {
        let c = kind.coefficient();
        BoundaryLaw {
            ell: kind.default_ell(),
            b_lower: c,
            b_upper: c,
            kind,
            face_multipliers: BTreeMap::new(),
        }
    }

    pub fn neumann() -> Self {
        Self::new(LawKind::Neumann)
    }

    pub fn robin(b: f64) -> Self {
        Self::new(LawKind::Robin { coefficient: b })
    }

    pub fn blackbody(sigma: f64) -> Self {
        Self::new(LawKind::Blackbody { sigma })
    }

    pub fn wien(b: f64) -> Self {
        Self::new(LawKind::Wien { coefficient: b })
    }

    pub fn from_config(cfg: &BoundaryLawConfig) -> Result<Self> {
        let mut law = Self::new(cfg.kind.clone());
        let mut mults = BTreeMap::new();
        for (name, m) in &cfg.face_multipliers {
            let face = BoxFace::parse(name)
                .ok_or_else(|| Error::Config(format!("unknown face `{name}` in face_multipliers")))?;
            mults.insert(face, *m);
        }
        if !mults.is_empty() {
            let lo = mults.values().cloned().fold(1.0f64, f64::min);
            let hi = mults.values().cloned().fold(1.0f64, f64::max);
            law.b_lower *= lo;
            law.b_upper *= hi;
        }
        law.face_multipliers = mults;
        if let Some(ell) = cfg.ell {
            law.ell = ell;
        }
        if let Some(b) = cfg.b_lower {
            law.b_lower = b;
        }
        if let Some(b) = cfg.b_upper {
            law.b_upper = b;
        }
        Ok(law)
    }

    pub fn to_config(&self) -> BoundaryLawConfig {
        BoundaryLawConfig {
            kind: self.kind.clone(),
            ell: Some(self.ell),
            b_lower: Some(self.b_lower),
            b_upper: Some(self.b_upper),
            face_multipliers: self
                .face_multipliers
                .iter()
                .map(|(f, m)| (f.to_string(), *m))
                .collect(),
        }
    }

    pub fn multiplier(&self, face: BoxFace) -> f64 {
        self.face_multipliers.get(&face).copied().unwrap_or(1.0)
    }

    /// `b(x, ξ)` for a point on `face`.
    pub fn eval(&self, face: BoxFace, xi: f64) -> f64 {
        self.multiplier(face) * self.kind.eval(xi)
    }

    /// Conjugate exponent ℓ' = ℓ / (ℓ - 1).
    pub fn ell_conjugate(&self) -> f64 {
        self.ell / (self.ell - 1.0)
    }

    pub fn is_constant(&self) -> bool {
        self.kind.is_constant()
    }

    pub fn is_neumann(&self) -> bool {
        self.kind == LawKind::Neumann || (self.b_upper == 0.0 && self.kind.coefficient() == 0.0)
    }
}

// ---------------------------------------------------------------------------
// Data and the full specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProblemData {
    pub u0: ScalarField,
    #[serde(default)]
    pub h: ScalarField,
    #[serde(default)]
    pub f: ScalarField,
}

impl ProblemData {
    /// Data for the manufactured solution `u*(x,t) = e^{-t} Π cos(π x_i)` on
    /// the unit box with isotropic diffusion `a`, zero drift and a linear law
    /// `b u` on Γ. The normal derivative of `u*` vanishes on every face.
    pub fn manufactured(n: usize, a: f64, robin: f64) -> Self {
        let profile = SpaceProfile::CosProduct { wavenumber: 1.0 };
        let decay = TimeProfile::Exp { rate: -1.0 };
        ProblemData {
            u0: ScalarField::new(profile.clone(), TimeProfile::Constant, 1.0),
            f: ScalarField::new(profile.clone(), decay.clone(), a * PI * PI * n as f64 - 1.0),
            h: ScalarField::new(profile, decay, robin),
        }
    }

    pub fn manufactured_exact(x: &[f64], t: f64) -> f64 {
        (-t).exp() * x.iter().map(|xi| (PI * xi).cos()).product::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub diffusion: DiffusionField,
    pub drift: DriftField,
    pub law: BoundaryLaw,
    pub data: ProblemData,
    /// Gradient integrability exponent of the L¹ theory.
    pub p: f64,
    /// The exponent `2_*` used when n = 2 by the b_# = 0 energy bound.
    pub two_star: f64,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn theta(&self) -> f64 {
        self.drift.theta(self.dim())
    }

    /// `2_*`: `2(n-1)/(n-2)` for n > 2, the configured value for n = 2.
    pub fn two_star(&self) -> f64 {
        let n = self.dim() as f64;
        if self.dim() > 2 {
            2.0 * (n - 1.0) / (n - 2.0)
        } else {
            self.two_star
        }
    }
}

// ---------------------------------------------------------------------------
// Truncation
// ---------------------------------------------------------------------------

/// `T_m(s) = min{m, max{-m, s}}`.
pub fn truncate(m: u32, s: f64) -> f64 {
    let m = m as f64;
    s.clamp(-m, m)
}

/// Written as `"none"` (or `null`) or as the level `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(from = "TruncationRepr", into = "TruncationRepr")]
pub enum Truncation {
    #[default]
    None,
    Level(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TruncationRepr {
    Level(u32),
    Word(NoTruncation),
    Null(Option<()>),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum NoTruncation {
    None,
}

impl From<TruncationRepr> for Truncation {
    fn from(r: TruncationRepr) -> Self {
        match r {
            TruncationRepr::Level(m) => Truncation::Level(m),
            _ => Truncation::None,
        }
    }
}

impl From<Truncation> for TruncationRepr {
    fn from(t: Truncation) -> Self {
        match t {
            Truncation::None => TruncationRepr::Word(NoTruncation::None),
            Truncation::Level(m) => TruncationRepr::Level(m),
        }
    }
}

impl Truncation {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Truncation::None => s,
            Truncation::Level(m) => truncate(m, s),
        }
    }

    /// `T_m(s) / s`, the factor that turns `s` into its truncation.
    pub fn factor(self, s: f64) -> f64 {
        match self {
            Truncation::None => 1.0,
            Truncation::Level(m) => {
                let m = m as f64;
                if s.abs() <= m {
                    1.0
                } else {
                    m / s.abs()
                }
            }
        }
    }

    /// Regularized source `m f / (m + |f|)`.
    pub fn regularize_source(self, f: f64) -> f64 {
        match self {
            Truncation::None => f,
            Truncation::Level(m) => {
                let m = m as f64;
                m * f / (m + f.abs())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "L2-theory")]
    L2Theory,
    #[serde(rename = "max-principle")]
    MaxPrinciple,
    #[serde(rename = "L1-theory")]
    L1Theory,
    #[serde(rename = "b0-L2")]
    B0L2,
    #[serde(rename = "b0-L1")]
    B0L1,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::L2Theory => "L2-theory",
            Regime::MaxPrinciple => "max-principle",
            Regime::L1Theory => "L1-theory",
            Regime::B0L2 => "b0-L2",
            Regime::B0L1 => "b0-L1",
            Regime::None => "none",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl AssumptionCheck {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        AssumptionCheck {
            name: name.to_string(),
            passed,
            detail: detail.into(),
            margin: None,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub regimes: Vec<Regime>,
    pub flags: Vec<String>,
}

impl ValidationReport {
    pub fn has(&self, regime: Regime) -> bool {
        self.regimes.contains(&regime)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingOptions {
    /// Gauss points per direction in cells.
    pub cell_points: usize,
    /// Gauss points per direction on facets.
    pub facet_points: usize,
    pub time_panels: usize,
    pub time_points: usize,
    /// ξ-grid for the boundary law covers `[-xi_max, xi_max]` logarithmically.
    pub xi_max: f64,
    pub xi_min: f64,
    pub xi_points: usize,
    /// Tolerance of the (p, q, r, n) relation.
    pub exponent_tol: f64,
    /// When set, time integrals use the right-endpoint rule on this many
    /// uniform steps, matching the implicit Euler grid.
    pub time_steps: Option<usize>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            cell_points: 4,
            facet_points: 5,
            time_panels: 16,
            time_points: 4,
            xi_max: 1e6,
            xi_min: 1e-6,
            xi_points: 121,
            exponent_tol: 1e-9,
            time_steps: None,
        }
    }
}

impl SamplingOptions {
    pub fn time_rule(&self, horizon: f64) -> TimeRule {
        match self.time_steps {
            Some(k) => TimeRule::right_endpoint(0.0, horizon, k),
            None => TimeRule::panels(0.0, horizon, self.time_panels, self.time_points),
        }
    }

    pub fn xi_grid(&self) -> Vec<f64> {
        let k = self.xi_points.max(2);
        let (lo, hi) = (self.xi_min.ln(), self.xi_max.ln());
        let pos: Vec<f64> = (0..k)
            .map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp())
            .collect();
        let mut grid: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
        grid.push(0.0);
        grid.extend(pos);
        grid
    }
}

/// Checks assumptions (A), (B), the exponent regimes and the sign hypotheses.
/// Never fails; downstream operations consult the regimes it reports.
pub fn validate(spec: &ProblemSpec, mesh: &Mesh, opts: &SamplingOptions) -> ValidationReport {
    let n = spec.dim();
    let nf = n as f64;
    let mut checks = Vec::new();
    let mut flags = Vec::new();

    if let Err(e) = spec.domain.check() {
        checks.push(AssumptionCheck::new("domain", false, e.to_string()));
    }

    // (A) ellipticity and boundedness at quadrature points.
    let rule = mesh.cell_rule(opts.cell_points);
    let diff = &spec.diffusion;
    let mut worst_eig = f64::INFINITY;
    let mut worst_pt = [0.0; 3];
    let mut worst_entry: f64 = 0.0;
    let mut entry_pt = [0.0; 3];
    for c in 0..mesh.n_cells() {
        for q in 0..rule.len() {
            let x = mesh.map_point(c, &rule.points[q]);
            let a = diff.field.eval(&x[..n], n);
            let eig = min_sym_eigenvalue(&a, n);
            if eig < worst_eig {
                worst_eig = eig;
                worst_pt = x;
            }
            let entry = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            if entry > worst_entry {
                worst_entry = entry;
                entry_pt = x;
            }
        }
    }
    let tol = 1e-12 * diff.a_upper.abs().max(1.0);
    let mut ell = AssumptionCheck::new(
        "(A) ellipticity",
        diff.a_lower > 0.0 && worst_eig >= diff.a_lower - tol,
        format!("min ξᵀAξ/|ξ|² = {worst_eig:.6e} vs a_# = {:.6e}", diff.a_lower),
    );
    ell.margin = Some(worst_eig - diff.a_lower);
    ell.witness = Some(format!("x = {:?}", &worst_pt[..n]));
    checks.push(ell);
    let mut bnd = AssumptionCheck::new(
        "(A) boundedness",
        worst_entry <= diff.a_upper + tol,
        format!("max |A_ij| = {worst_entry:.6e} vs a^# = {:.6e}", diff.a_upper),
    );
    bnd.margin = Some(diff.a_upper - worst_entry);
    bnd.witness = Some(format!("x = {:?}", &entry_pt[..n]));
    checks.push(bnd);

    // (B) growth and monotonicity on a ξ grid, for every face multiplier.
    let law = &spec.law;
    let grid = opts.xi_grid();
    let faces = spec.domain.gamma_faces().unwrap_or_default();
    let mut growth_ok = law.ell >= 2.0 && law.b_lower >= 0.0 && law.b_upper >= law.b_lower;
    let mut growth_worst = String::new();
    let mut mono_ok = true;
    let mut mono_worst = String::new();
    let mut mono_margin = f64::INFINITY;
    for &face in &faces {
        let mut prev: Option<(f64, f64)> = None;
        for &xi in &grid {
            let b = law.eval(face, xi);
            let pow = xi.abs().powf(law.ell - 2.0);
            let lo = law.b_lower * pow;
            let hi = law.b_upper * pow;
            let slack = 1e-12 * hi.abs().max(b.abs());
            if b < lo - slack || b > hi + slack || !b.is_finite() {
                if growth_ok {
                    growth_worst = format!("face {face}, ξ = {xi:e}: b = {b:e} outside [{lo:e}, {hi:e}]");
                }
                growth_ok = false;
            }
            let g = b * xi;
            if let Some((px, pg)) = prev {
                let d = g - pg;
                if d < mono_margin {
                    mono_margin = d;
                    mono_worst = format!("face {face}, ξ = {px:e} → {xi:e}");
                }
                if d < -1e-12 * pg.abs().max(g.abs()) {
                    mono_ok = false;
                }
            }
            prev = Some((xi, g));
        }
    }
    let mut growth = AssumptionCheck::new(
        "(B) growth",
        growth_ok,
        format!(
            "b_# |ξ|^(ℓ-2) ≤ b ≤ b^# |ξ|^(ℓ-2), ℓ = {}, b_# = {:e}, b^# = {:e}",
            law.ell, law.b_lower, law.b_upper
        ),
    );
    if !growth_ok {
        growth.witness = Some(growth_worst);
    }
    checks.push(growth);
    let mut mono = AssumptionCheck::new("(B) monotonicity", mono_ok, "ξ ↦ b(ξ)ξ nondecreasing");
    mono.witness = Some(mono_worst);
    mono.margin = Some(mono_margin);
    checks.push(mono);

    let base_ok = checks.iter().all(|c| c.passed);

    // Exponent conditions.
    let q = spec.drift.q;
    let r = spec.drift.r;
    let p = spec.p;
    let theta = spec.theta();
    let drift_sum = 2.0 / r + nf / q;
    let l2_ok = if n > 2 {
        let c = AssumptionCheck::new(
            "L2 exponents",
            q > nf && drift_sum <= 1.0 && theta == 0.0,
            format!("2/r + n/q = {drift_sum:.6} ≤ 1 (n > 2, θ = 0)"),
        );
        let ok = c.passed;
        checks.push(c);
        ok
    } else {
        let theta_ok = theta > 0.0 && theta < 1.0 - 2.0 / q;
        let c = AssumptionCheck::new(
            "L2 exponents",
            q > 2.0 && drift_sum < 1.0 && theta_ok,
            format!(
                "2/r + 2/q = {drift_sum:.6} < 1 and 0 < θ = {theta:.6} < 1 - 2/q = {:.6}",
                1.0 - 2.0 / q
            ),
        );
        let ok = c.passed;
        checks.push(c);
        ok
    };
    let strict = drift_sum < 1.0;
    checks.push(AssumptionCheck::new(
        "max-principle exponents",
        strict && r > 2.0 && q > 2.0,
        format!("2/r + n/q = {drift_sum:.6} < 1"),
    ));

    let rnq = r * (1.0 - nf / q);
    let pqrn = nf / q + (p * (nf + 1.0) - nf) / r;
    let p_hi = (nf + 2.0) / (nf + 1.0);
    let l1_rnq = rnq > 1.0 && rnq < 2.0;
    let l1_pqrn = (pqrn - 1.0).abs() <= opts.exponent_tol;
    let l1_p = p > 1.0 && p < p_hi;
    checks.push(AssumptionCheck::new(
        "L1 exponents (rnq)",
        l1_rnq,
        format!("1 < r(1 - n/q) = {rnq:.6} < 2"),
    ));
    checks.push(AssumptionCheck::new(
        "L1 exponents (pqrn)",
        l1_pqrn,
        format!("n/q + (p(n+1) - n)/r = {pqrn:.9} must equal 1"),
    ));
    checks.push(AssumptionCheck::new(
        "L1 exponents (p)",
        l1_p,
        format!("1 < p = {p} < (n+2)/(n+1) = {p_hi:.6}"),
    ));
    let l1_ok = l1_rnq && l1_pqrn && l1_p;

    let b_pos = law.b_lower > 0.0;
    let ell_b0_l2 = (2.0..=3.0).contains(&law.ell);
    let ell_b0_l1 = law.ell >= 2.0 && law.ell <= p + 1.0 + 1e-12;
    if !b_pos {
        checks.push(AssumptionCheck::new(
            "b0-L2 growth exponent",
            ell_b0_l2,
            if law.ell > 3.0 {
                format!("ℓ = {} > 3", law.ell)
            } else {
                format!("2 ≤ ℓ = {} ≤ 3", law.ell)
            },
        ));
        checks.push(AssumptionCheck::new(
            "b0-L1 growth exponent",
            ell_b0_l1,
            format!("2 ≤ ℓ = {} ≤ p + 1 = {}", law.ell, p + 1.0),
        ));
    }

    // Sign hypotheses for the maximum principle.
    let (u0_min, h_min, f_min) = sample_signs(spec, mesh, opts);
    let signs_ok = u0_min > 0.0 && h_min >= 0.0;
    checks.push(AssumptionCheck::new(
        "sign data",
        signs_ok,
        format!("min u0 = {u0_min:.6e} > 0, min h = {h_min:.6e} ≥ 0"),
    ));
    checks.push(AssumptionCheck::new(
        "min-principle signs",
        u0_min >= 0.0 && h_min >= 0.0 && f_min >= 0.0,
        format!("min u0 = {u0_min:.6e}, min h = {h_min:.6e}, min f = {f_min:.6e}, all ≥ 0"),
    ));

    if !spec.data.f.is_zero() {
        flags.push("f ≠ 0: the L2 energy bound assumes f ≡ 0".to_string());
    }
    if !b_pos && !law.is_neumann() {
        flags.push("b_# = 0 with a nonzero law: bounds use b^# only".to_string());
    }

    let mut regimes = Vec::new();
    if base_ok {
        if b_pos && l2_ok {
            regimes.push(Regime::L2Theory);
            if strict && signs_ok {
                regimes.push(Regime::MaxPrinciple);
            }
        }
        if b_pos && l1_ok {
            regimes.push(Regime::L1Theory);
        }
        if !b_pos && l2_ok && ell_b0_l2 {
            regimes.push(Regime::B0L2);
        }
        if !b_pos && l1_ok && ell_b0_l1 {
            regimes.push(Regime::B0L1);
        }
    }
    if regimes.is_empty() {
        regimes.push(Regime::None);
    }
    ValidationReport {
        checks,
        regimes,
        flags,
    }
}

/// Minima of u0, h and f over the sample points.
fn sample_signs(spec: &ProblemSpec, mesh: &Mesh, opts: &SamplingOptions) -> (f64, f64, f64) {
    let n = spec.dim();
    let rule = mesh.cell_rule(opts.cell_points);
    let mut u0_min = f64::INFINITY;
    for v in &mesh.vertices {
        u0_min = u0_min.min(spec.data.u0.eval(&v[..n], 0.0));
    }
    for c in 0..mesh.n_cells() {
        for q in 0..rule.len() {
            let x = mesh.map_point(c, &rule.points[q]);
            u0_min = u0_min.min(spec.data.u0.eval(&x[..n], 0.0));
        }
    }
    let frule = mesh.facet_rule(opts.facet_points);
    let mut times = opts.time_rule(spec.domain.time_horizon).nodes;
    times.push(0.0);
    times.push(spec.domain.time_horizon);
    let mut h_min = f64::INFINITY;
    for (f, _) in mesh.gamma_facets() {
        for q in 0..frule.len() {
            let x = mesh.map_facet_point(f, &frule.points[q]);
            for &t in &times {
                h_min = h_min.min(spec.data.h.eval(&x[..n], t));
            }
        }
    }
    let mut f_min: f64 = 0.0;
    if !spec.data.f.is_zero() {
        f_min = f64::INFINITY;
        for c in 0..mesh.n_cells() {
            for q in 0..rule.len() {
                let x = mesh.map_point(c, &rule.points[q]);
                for &t in &times {
                    f_min = f_min.min(spec.data.f.eval(&x[..n], t));
                }
            }
        }
    }
    (u0_min, h_min, f_min)
}

// ---------------------------------------------------------------------------
// Norms of fields
// ---------------------------------------------------------------------------

/// `‖E(t)‖_{q,Ω}` by per-cell quadrature.
pub fn drift_space_norm(field: &VectorField, mesh: &Mesh, t: f64, q: f64, cell_points: usize) -> Result<f64> {
    let n = mesh.dim;
    let rule = mesh.cell_rule(cell_points);
    let mut acc = NeumaierSum::default();
    let mut e = [0.0; 3];
    let mut sup: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume[c];
        for k in 0..rule.len() {
            let x = mesh.map_point(c, &rule.points[k]);
            field.eval(&x[..n], t, &mut e[..n]);
            let mag = e[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if !mag.is_finite() {
                return Err(Error::NonFinite(format!("drift at x = {:?}, t = {t}", &x[..n])));
            }
            sup = sup.max(mag);
            if q.is_finite() {
                acc.add(vol * rule.weights[k] * mag.powf(q));
            }
        }
    }
    Ok(if q.is_finite() { acc.value().powf(1.0 / q) } else { sup })
}

/// `‖E‖_{q,r,Q_T} = (∫_0^T ‖E(t)‖_{q,Ω}^r dt)^{1/r}` with Gauss-Legendre panels in time.
pub fn drift_mixed_norm(field: &VectorField, mesh: &Mesh, horizon: f64, q: f64, r: f64, opts: &SamplingOptions) -> Result<f64> {
    if field.is_zero() {
        return Ok(0.0);
    }
    let rule = opts.time_rule(horizon);
    let mut acc = NeumaierSum::default();
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        acc.add(w * drift_space_norm(field, mesh, *t, q, opts.cell_points)?.powf(r));
    }
    Ok(acc.value().powf(1.0 / r))
}

/// `‖E‖_{q,r,Q_T}` of the problem's drift.
pub fn drift_norm(spec: &ProblemSpec, mesh: &Mesh, opts: &SamplingOptions) -> Result<f64> {
    let d = &spec.drift;
    if !(d.q.is_finite() && d.r.is_finite()) {
        return Err(Error::Problem("drift_norm needs finite q and r".into()));
    }
    drift_mixed_norm(&d.field, mesh, spec.domain.time_horizon, d.q, d.r, opts)
}

/// Norms of data and drift consumed by the bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DataNorms {
    pub u0_l1: f64,
    pub u0_l2: f64,
    pub u0_linf: f64,
    pub f_l1: f64,
    pub f_is_zero: bool,
    pub h_l1: f64,
    pub h_linf: f64,
    /// `‖h‖^{ℓ'}_{ℓ',Σ_T}`
    pub h_ellprime_pow: f64,
    /// `‖h‖_{(2_*)',2,Σ_T}`
    pub h_two_star_dual: f64,
    /// `‖E‖_{q,2,Q_T}`
    pub e_q2: f64,
    /// `‖E‖_{q,r,Q_T}`
    pub e_qr: f64,
    /// `∫_0^T ‖E‖_{q,Ω}^{2/(1-n/q-θ)} dt`, infinite when the exponent is not positive.
    pub e_gronwall: f64,
}

impl DataNorms {
    pub fn compute(spec: &ProblemSpec, mesh: &Mesh, opts: &SamplingOptions) -> Result<Self> {
        let n = spec.dim();
        let horizon = spec.domain.time_horizon;
        let trule = opts.time_rule(horizon);
        let crule = mesh.cell_rule(opts.cell_points);
        let frule = mesh.facet_rule(opts.facet_points);

        let mut u0_l1 = NeumaierSum::default();
        let mut u0_l2 = NeumaierSum::default();
        let mut u0_linf: f64 = 0.0;
        for v in &mesh.vertices {
            u0_linf = u0_linf.max(spec.data.u0.eval(&v[..n], 0.0).abs());
        }
        for c in 0..mesh.n_cells() {
            let vol = mesh.cell_volume[c];
            for k in 0..crule.len() {
                let x = mesh.map_point(c, &crule.points[k]);
                let u = spec.data.u0.eval(&x[..n], 0.0);
                u0_l1.add(vol * crule.weights[k] * u.abs());
                u0_l2.add(vol * crule.weights[k] * u * u);
                u0_linf = u0_linf.max(u.abs());
            }
        }

        let mut f_l1 = NeumaierSum::default();
        if !spec.data.f.is_zero() {
            for (t, wt) in trule.nodes.iter().zip(&trule.weights) {
                for c in 0..mesh.n_cells() {
                    let vol = mesh.cell_volume[c];
                    for k in 0..crule.len() {
                        let x = mesh.map_point(c, &crule.points[k]);
                        f_l1.add(wt * vol * crule.weights[k] * spec.data.f.eval(&x[..n], *t).abs());
                    }
                }
            }
        }

        let lp = spec.law.ell_conjugate();
        let ts = spec.two_star();
        let ts_dual = ts / (ts - 1.0);
        let mut h_l1 = NeumaierSum::default();
        let mut h_lp = NeumaierSum::default();
        let mut h_dual = NeumaierSum::default();
        let mut h_linf: f64 = 0.0;
        if !spec.data.h.is_zero() {
            for (t, wt) in trule.nodes.iter().zip(&trule.weights) {
                let mut slice = NeumaierSum::default();
                for (fi, facet) in mesh.gamma_facets() {
                    for k in 0..frule.len() {
                        let x = mesh.map_facet_point(fi, &frule.points[k]);
                        let h = spec.data.h.eval(&x[..n], *t).abs();
                        let w = facet.area * frule.weights[k];
                        h_l1.add(wt * w * h);
                        h_lp.add(wt * w * h.powf(lp));
                        slice.add(w * h.powf(ts_dual));
                        h_linf = h_linf.max(h);
                    }
                }
                h_dual.add(wt * slice.value().powf(2.0 / ts_dual));
            }
            for t in [0.0, horizon] {
                for (fi, _) in mesh.gamma_facets() {
                    for k in 0..frule.len() {
                        let x = mesh.map_facet_point(fi, &frule.points[k]);
                        h_linf = h_linf.max(spec.data.h.eval(&x[..n], t).abs());
                    }
                }
            }
        }

        let q = spec.drift.q;
        let theta = spec.theta();
        let gexp = 2.0 / (1.0 - n as f64 / q - theta);
        let field = &spec.drift.field;
        let (e_q2, e_qr, e_gronwall) = if field.is_zero() {
            (0.0, 0.0, 0.0)
        } else {
            let mut s2 = NeumaierSum::default();
            let mut sr = NeumaierSum::default();
            let mut sg = NeumaierSum::default();
            for (t, wt) in trule.nodes.iter().zip(&trule.weights) {
                let e = drift_space_norm(field, mesh, *t, q, opts.cell_points)?;
                s2.add(wt * e * e);
                sr.add(wt * e.powf(spec.drift.r));
                if gexp > 0.0 && gexp.is_finite() {
                    sg.add(wt * e.powf(gexp));
                }
            }
            let g = if gexp > 0.0 && gexp.is_finite() {
                sg.value()
            } else {
                f64::INFINITY
            };
            (s2.value().sqrt(), sr.value().powf(1.0 / spec.drift.r), g)
        };

        Ok(DataNorms {
            u0_l1: u0_l1.value(),
            u0_l2: u0_l2.value().sqrt(),
            u0_linf,
            f_l1: f_l1.value(),
            f_is_zero: spec.data.f.is_zero(),
            h_l1: h_l1.value(),
            h_linf,
            h_ellprime_pow: h_lp.value(),
            h_two_star_dual: h_dual.value().sqrt(),
            e_q2,
            e_qr,
            e_gronwall,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_box_mesh_divisions, GammaSelector};
    use approx::assert_relative_eq;

    pub(crate) fn base_spec() -> ProblemSpec {
        ProblemSpec {
            domain: DomainSpec::unit_square(GammaSelector::faces(&["left"]), 1.0),
            diffusion: DiffusionField::identity(2),
            drift: DriftField {
                field: VectorField::zero(),
                q: 8.0,
                r: 8.0,
                theta: None,
            },
            law: BoundaryLaw::robin(1.0),
            data: ProblemData {
                u0: ScalarField::constant(1.0),
                h: ScalarField::zero(),
                f: ScalarField::zero(),
            },
            p: 1.2,
            two_star: 4.0,
        }
    }

    fn mesh(spec: &ProblemSpec, k: usize) -> Mesh {
        build_box_mesh_divisions(&spec.domain, &[k, k]).unwrap()
    }

    #[test]
    fn identity_is_elliptic_with_zero_margin() {
        let spec = base_spec();
        let rep = validate(&spec, &mesh(&spec, 4), &SamplingOptions::default());
        let c = rep.check("(A) ellipticity").unwrap();
        assert!(c.passed);
        assert_eq!(c.margin, Some(0.0));
    }

    #[test]
    fn blackbody_growth_and_monotonicity() {
        let mut spec = base_spec();
        spec.law = BoundaryLaw::blackbody(5.670374419e-8);
        let opts = SamplingOptions {
            xi_max: 10.0,
            xi_min: 1e-3,
            ..Default::default()
        };
        let rep = validate(&spec, &mesh(&spec, 4), &opts);
        assert!(rep.check("(B) growth").unwrap().passed);
        assert!(rep.check("(B) monotonicity").unwrap().passed);
        assert_eq!(spec.law.ell, 5.0);
    }

    #[test]
    fn l2_regime_fails_for_slow_drift_exponents() {
        let mut spec = base_spec();
        spec.drift.q = 3.0;
        spec.drift.r = 3.0;
        let rep = validate(&spec, &mesh(&spec, 4), &SamplingOptions::default());
        let c = rep.check("L2 exponents").unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains("2/r + 2/q = 1.333333"));
        assert!(!rep.has(Regime::L2Theory));
    }

    #[test]
    fn regimes_follow_exponents() {
        let mut spec = base_spec();
        let m = mesh(&spec, 4);
        let rep = validate(&spec, &m, &SamplingOptions::default());
        assert!(rep.has(Regime::L2Theory));
        assert!(rep.has(Regime::MaxPrinciple));

        spec.drift.q = 4.0;
        spec.drift.r = 3.2;
        spec.p = 1.2;
        let rep = validate(&spec, &m, &SamplingOptions::default());
        assert_eq!(rep.regimes, vec![Regime::L1Theory]);

        spec.law.b_lower = 0.0;
        spec.law.ell = 2.0;
        let rep = validate(&spec, &m, &SamplingOptions::default());
        assert_eq!(rep.regimes, vec![Regime::B0L1]);

        spec.drift.q = 8.0;
        spec.drift.r = 8.0;
        let rep = validate(&spec, &m, &SamplingOptions::default());
        assert_eq!(rep.regimes, vec![Regime::B0L2]);

        spec.law = BoundaryLaw::blackbody(1.0);
        spec.law.b_lower = 0.0;
        let rep = validate(&spec, &m, &SamplingOptions::default());
        assert_eq!(rep.regimes, vec![Regime::None]);
        assert!(rep.check("b0-L2 growth exponent").unwrap().detail.contains("> 3"));
    }

    #[test]
    fn invalid_growth_bounds_are_reported() {
        let mut spec = base_spec();
        spec.law.b_upper = 0.5;
        let rep = validate(&spec, &mesh(&spec, 2), &SamplingOptions::default());
        assert!(!rep.check("(B) growth").unwrap().passed);
        assert_eq!(rep.regimes, vec![Regime::None]);
    }

    #[test]
    fn non_monotone_law_is_caught() {
        let mut spec = base_spec();
        spec.law = BoundaryLaw::new(LawKind::Custom {
            coefficient: -1.0,
            ell: 3.0,
        });
        spec.law.b_lower = -1.0;
        let rep = validate(&spec, &mesh(&spec, 2), &SamplingOptions::default());
        assert!(!rep.check("(B) monotonicity").unwrap().passed);
    }

    #[test]
    fn zero_drift_norm() {
        let spec = base_spec();
        let v = drift_norm(&spec, &mesh(&spec, 4), &SamplingOptions::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn constant_unit_drift_norm() {
        let mut spec = base_spec();
        let s = 0.5f64.sqrt();
        spec.drift.field = VectorField::constant(vec![s, s]);
        for (q, r) in [(3.0, 2.0), (8.0, 8.0), (4.5, 1.5)] {
            spec.drift.q = q;
            spec.drift.r = r;
            let v = drift_norm(&spec, &mesh(&spec, 4), &SamplingOptions::default()).unwrap();
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_in_time_drift_norm() {
        let mut spec = base_spec();
        spec.drift.field = VectorField {
            space: VectorProfile::Constant { value: vec![1.0, 0.0] },
            time: TimeProfile::Affine { a: 0.0, b: 1.0 },
            scale: 1.0,
        };
        spec.drift.q = 2.0;
        spec.drift.r = 2.0;
        let v = drift_norm(&spec, &mesh(&spec, 4), &SamplingOptions::default()).unwrap();
        assert_relative_eq!(v, 3f64.powf(-0.5), epsilon = 1e-12);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(2, 5.0), 2.0);
        assert_eq!(truncate(2, -3.0), -2.0);
        assert_eq!(truncate(3, 1.25), 1.25);
        assert_eq!(Truncation::None.apply(1e9), 1e9);
        for (text, t) in [(r#""none""#, Truncation::None), ("null", Truncation::None), ("7", Truncation::Level(7))] {
            assert_eq!(serde_json::from_str::<Truncation>(text).unwrap(), t);
        }
        assert_eq!(serde_json::to_string(&Truncation::None).unwrap(), r#""none""#);
        assert!(serde_json::from_str::<Truncation>(r#""all""#).is_err());
        assert_eq!(Truncation::Level(2).factor(-8.0) * -8.0, -2.0);
    }

    #[test]
    fn regularized_source_is_dominated() {
        let t = Truncation::Level(3);
        for f in [-100.0, -2.0, 0.0, 0.5, 7.0, 1e6] {
            let g: f64 = t.regularize_source(f);
            assert!(g.abs() <= f.abs().min(3.0) + 1e-15);
            assert!(g * f >= 0.0);
        }
    }

    #[test]
    fn theta_defaults_to_midpoint() {
        let spec = base_spec();
        assert_relative_eq!(spec.theta(), 0.375);
    }

    #[test]
    fn data_norms_of_constants() {
        let mut spec = base_spec();
        spec.domain.time_horizon = 2.0;
        spec.data.u0 = ScalarField::constant(3.0);
        spec.data.h = ScalarField::constant(2.0);
        spec.data.f = ScalarField::constant(-1.0);
        let norms = DataNorms::compute(&spec, &mesh(&spec, 4), &SamplingOptions::default()).unwrap();
        assert_relative_eq!(norms.u0_l1, 3.0, epsilon = 1e-13);
        assert_relative_eq!(norms.u0_l2, 3.0, epsilon = 1e-13);
        assert_relative_eq!(norms.u0_linf, 3.0);
        assert_relative_eq!(norms.f_l1, 2.0, epsilon = 1e-13);
        assert_relative_eq!(norms.h_l1, 4.0, epsilon = 1e-13);
        assert_relative_eq!(norms.h_linf, 2.0);
        // ℓ = 2: ‖h‖² over Σ_T = 4 · 2
        assert_relative_eq!(norms.h_ellprime_pow, 8.0, epsilon = 1e-13);
        // (2_*)' = 4/3: ‖h(t)‖_{4/3,Γ} = 2, then L² in time: 2 √2
        assert_relative_eq!(norms.h_two_star_dual, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn manufactured_data_matches_exact_solution_at_zero() {
        let d = ProblemData::manufactured(2, 1.0, 1.0);
        let x = [0.3, 0.7];
        assert_relative_eq!(d.u0.eval(&x, 0.0), ProblemData::manufactured_exact(&x, 0.0));
    }
}
