//! Case configuration (JSON).
//!
//! ```json
//! {
//!   "name": "robin",
//!   "problem": {
//!     "domain": { "extents": [1, 1], "gamma": ["left", "right"], "time_horizon": 0.5 },
//!     "diffusion": { "kind": "isotropic", "value": 1.0 },
//!     "drift": { "field": { "space": { "kind": "zero" } }, "q": 8, "r": 8 },
//!     "law": { "kind": "robin", "coefficient": 1.0 },
//!     "data": { "u0": { "space": { "kind": "constant" }, "scale": 1.0 } },
//!     "p": 1.2,
//!     "two_star": 4
//!   },
//!   "discretization": { "divisions": [16, 16], "dt": 0.01 },
//!   "registry": { "constants": [{ "kind": "S_p", "p": 1.2, "value": 2.0 }] },
//!   "outputs": { "fields": false }
//! }
//! ```
//!
//! `diffusion.a_lower`/`a_upper` default to the exact bounds of the preset;
//! the law accepts `ell`, `b_lower`, `b_upper` and `face_multipliers`
//! overrides. Every section except `problem` may be omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::SeriesOptions;
use crate::domain::{build_box_mesh, build_box_mesh_divisions, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::problem::{
    BoundaryLaw, BoundaryLawConfig, DiffusionField, DriftField, MatrixField, ProblemData, ProblemSpec, SamplingOptions,
    Truncation,
};
use crate::sobolev::{ConstantKind, EstimatorOptions};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    #[serde(flatten)]
    pub field: MatrixField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub domain: DomainSpec,
    pub diffusion: DiffusionConfig,
    pub drift: DriftField,
    pub law: BoundaryLawConfig,
    pub data: ProblemData,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_two_star")]
    pub two_star: f64,
}

fn default_p() -> f64 {
    1.2
}

fn default_two_star() -> f64 {
    4.0
}

impl ProblemConfig {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let n = self.domain.dim();
        let mut diffusion = DiffusionField::exact(self.diffusion.field.clone(), n);
        if let Some(a) = self.diffusion.a_lower {
            diffusion.a_lower = a;
        }
        if let Some(a) = self.diffusion.a_upper {
            diffusion.a_upper = a;
        }
        Ok(ProblemSpec {
            domain: self.domain.clone(),
            diffusion,
            drift: self.drift.clone(),
            law: BoundaryLaw::from_config(&self.law)?,
            data: self.data.clone(),
            p: self.p,
            two_star: self.two_star,
        })
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        ProblemConfig {
            domain: spec.domain.clone(),
            diffusion: DiffusionConfig {
                field: spec.diffusion.field.clone(),
                a_lower: Some(spec.diffusion.a_lower),
                a_upper: Some(spec.diffusion.a_upper),
            },
            drift: spec.drift.clone(),
            law: spec.law.to_config(),
            data: spec.data.clone(),
            p: spec.p,
            two_star: spec.two_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Discretization {
    /// Cells per axis; overrides `target_h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divisions: Option<Vec<usize>>,
    pub target_h: f64,
    /// Defaults to `h²/a^#` rounded to divide T.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub truncation: Truncation,
    pub regularize_source: bool,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub damping: f64,
    pub upwind: bool,
    pub quad_points: usize,
    /// Absolute tolerance of the minimum principle and invariant checks.
    pub check_tol: f64,
    /// Relative round-off allowance of bound comparisons.
    pub bound_rel_tol: f64,
    /// Re-run at (h/2, dt/4) when a bound row is violated.
    pub refine_on_violation: bool,
}

impl Default for Discretization {
    fn default() -> Self {
        let s = SolverOptions::default();
        Discretization {
            divisions: None,
            target_h: 1.0 / 16.0,
            dt: None,
            truncation: Truncation::None,
            regularize_source: s.regularize_source,
            picard_tol: s.picard_tol,
            picard_max: s.picard_max,
            damping: s.damping,
            upwind: false,
            quad_points: s.quad_points,
            check_tol: 1e-8,
            bound_rel_tol: 1e-12,
            refine_on_violation: true,
        }
    }
}

impl Discretization {
    pub fn mesh(&self, domain: &DomainSpec) -> Result<Mesh> {
        match &self.divisions {
            Some(d) => build_box_mesh_divisions(domain, d),
            None => build_box_mesh(domain, self.target_h),
        }
    }

    pub fn solver_options(&self, spec: &ProblemSpec, mesh: &Mesh, exec: Exec) -> SolverOptions {
        let horizon = spec.domain.time_horizon;
        SolverOptions {
            dt: self.dt.unwrap_or_else(|| SolverOptions::default_dt(mesh, spec.diffusion.a_upper, horizon)),
            truncation: self.truncation,
            regularize_source: self.regularize_source,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            damping: self.damping,
            upwind: self.upwind,
            quad_points: self.quad_points,
            exec,
        }
    }

    /// Twice the divisions and a quarter of the time step.
    pub fn refined(&self, mesh: &Mesh, dt: f64) -> Self {
        Discretization {
            divisions: Some(mesh.divisions.iter().map(|d| 2 * d).collect()),
            dt: Some(dt / 4.0),
            refine_on_violation: false,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverride {
    pub kind: ConstantKind,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    /// User-supplied upper bounds; they take precedence over analytic ones.
    pub constants: Vec<ConstantOverride>,
    /// Estimate constants without an analytic bound and use the fallback.
    pub estimate_missing: bool,
    pub estimator: EstimatorOptions,
    /// σ of the maximum principle instead of the default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub series: SeriesOptions,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            constants: Vec::new(),
            estimate_missing: false,
            estimator: EstimatorOptions::default(),
            sigma: None,
            series: SeriesOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Outputs {
    /// Write per-step nodal fields.
    pub fields: bool,
    /// Write the mesh as a node/element list.
    pub mesh: bool,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub registry: RegistryConfig,
    #[serde(default)]
    pub sampling: SamplingOptions,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

fn default_name() -> String {
    "case".into()
}

impl CaseConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_spec(name: &str, spec: &ProblemSpec) -> Self {
        CaseConfig {
            name: name.into(),
            problem: ProblemConfig::from_spec(spec),
            discretization: Discretization::default(),
            registry: RegistryConfig::default(),
            sampling: SamplingOptions::default(),
            outputs: Outputs::default(),
            seed: 0,
            exec: Exec::default(),
        }
    }

    /// Sets a value by dotted path in the JSON form, e.g.
    /// `problem.law.coefficient=0.5`. The value is parsed as JSON when
    /// possible and as a string otherwise.
    pub fn with_override(&self, path: &str, value: &str) -> Result<Self> {
        let mut json = serde_json::to_value(self)?;
        let parsed: serde_json::Value =
            serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let mut node = &mut json;
        let keys: Vec<&str> = path.split('.').collect();
        for (i, key) in keys.iter().enumerate() {
            let last = i + 1 == keys.len();
            node = match node {
                serde_json::Value::Object(map) => {
                    if last {
                        map.insert(key.to_string(), parsed.clone());
                        break;
                    }
                    map.entry(key.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()))
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = key.parse().map_err(|_| Error::Config(format!("`{key}` is not an index in `{path}`")))?;
                    let len = items.len();
                    let slot = items.get_mut(idx).ok_or_else(|| Error::Config(format!("index {idx} out of range ({len}) in `{path}`")))?;
                    if last {
                        *slot = parsed.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(Error::Config(format!("cannot descend into `{key}` of `{path}`"))),
            };
        }
        serde_json::from_value(json).map_err(|e| Error::Config(format!("override `{path}={value}`: {e}")))
    }
}

/// Axis shorthands accepted by `sweep --axis`.
pub fn axis_path(key: &str) -> &str {
    match key {
        "bsharp" | "b_lower" => "problem.law.b_lower",
        "coefficient" | "b" => "problem.law.coefficient",
        "ell" => "problem.law.ell",
        "escale" | "drift_scale" => "problem.drift.field.scale",
        "T" | "horizon" => "problem.domain.time_horizon",
        "dt" => "discretization.dt",
        "m" | "truncation" => "discretization.truncation",
        "h" | "target_h" => "discretization.target_h",
        "p" => "problem.p",
        "q" => "problem.drift.q",
        "r" => "problem.drift.r",
        "u0_scale" => "problem.data.u0.scale",
        "h_scale" => "problem.data.h.scale",
        "f_scale" => "problem.data.f.scale",
        "seed" => "seed",
        other => other,
    }
}
