//! Closed-form a-priori bounds and the constants they are built from.
//!
//! Every operation is a pure function of [`BoundInputs`] (scalars and data
//! norms) and a [`SobolevRegistry`]. Operations tied to a regime refuse to
//! run outside it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{measures, Mesh};
use crate::error::{precondition, Error, Result};
use crate::problem::{DataNorms, ProblemSpec, Regime, SamplingOptions, ValidationReport};
use crate::sobolev::{ConstantKind, Provenance, SobolevRegistry};

pub mod energy;
pub mod l1;
pub mod moser;

pub use energy::*;
pub use l1::*;
pub use moser::*;

use moser::sigma_constant_key;

/// Scalars consumed by the bound formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub vol_omega: f64,
    pub area_gamma: f64,
    pub horizon: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    pub ell: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub theta: f64,
    pub two_star: f64,
    pub norms: DataNorms,
    pub regimes: Vec<Regime>,
    /// u0, h and f are nonnegative.
    pub nonnegative_data: bool,
    /// Replaces the default σ of the maximum principle.
    pub sigma_override: Option<f64>,
}

impl BoundInputs {
    pub fn from_problem(spec: &ProblemSpec, mesh: &Mesh, validation: &ValidationReport, opts: &SamplingOptions) -> Result<Self> {
        let m = measures(mesh, spec.domain.time_horizon)?;
        Ok(BoundInputs {
            n: spec.dim(),
            vol_omega: m.vol_omega,
            area_gamma: m.area_gamma,
            horizon: spec.domain.time_horizon,
            a_lower: spec.diffusion.a_lower,
            a_upper: spec.diffusion.a_upper,
            b_lower: spec.law.b_lower,
            b_upper: spec.law.b_upper,
            ell: spec.law.ell,
            p: spec.p,
            q: spec.drift.q,
            r: spec.drift.r,
            theta: spec.theta(),
            two_star: spec.two_star(),
            norms: DataNorms::compute(spec, mesh, opts)?,
            regimes: validation.regimes.clone(),
            nonnegative_data: validation.check("min-principle signs").is_some_and(|c| c.passed),
            sigma_override: None,
        })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `|Σ_T| = T |Γ|`
    pub fn sigma_t(&self) -> f64 {
        self.horizon * self.area_gamma
    }

    pub fn has(&self, r: Regime) -> bool {
        self.regimes.contains(&r)
    }

    pub(crate) fn require(&self, op: &'static str, allowed: &[Regime]) -> Result<()> {
        if allowed.iter().any(|r| self.has(*r)) {
            return Ok(());
        }
        let want: Vec<String> = allowed.iter().map(|r| r.to_string()).collect();
        let have: Vec<String> = self.regimes.iter().map(|r| r.to_string()).collect();
        Err(precondition(
            op,
            format!("requires regime {} but the problem is in {}", want.join(" or "), have.join(", ")),
        ))
    }
}

/// A Sobolev constant as consumed by a formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantUse {
    pub symbol: String,
    pub kind: ConstantKind,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub value: f64,
    pub provenance: Provenance,
}

pub(crate) fn upper(reg: &SobolevRegistry, uses: &mut Vec<ConstantUse>, kind: ConstantKind, p: f64, q: Option<f64>) -> Result<f64> {
    let e = reg.lookup_upper(kind, p, q)?;
    let symbol = match e.q {
        Some(q) => format!("{}[{:.6},{:.6}]", kind, e.p, q),
        None => format!("{}[{:.6}]", kind, e.p),
    };
    if !uses.iter().any(|u| u.symbol == symbol) {
        uses.push(ConstantUse {
            symbol,
            kind,
            p: e.p,
            q: e.q,
            value: e.value,
            provenance: e.provenance,
        });
    }
    Ok(e.value)
}

pub fn is_conditional(uses: &[ConstantUse]) -> bool {
    uses.iter().any(|u| !u.provenance.is_upper())
}

pub(crate) fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

/// Every (kind, p, q) the formulas may request for these inputs.
pub fn required_constants(inp: &BoundInputs) -> Vec<(ConstantKind, f64, Option<f64>)> {
    let mut out = Vec::new();
    let n = inp.nf();
    if inp.has(Regime::L2Theory) || inp.has(Regime::B0L2) {
        let tq = inp.theta * inp.q;
        out.push((ConstantKind::Sp, (2.0 + tq) / (1.0 + tq), None));
    }
    if inp.has(Regime::L1Theory) || inp.has(Regime::B0L1) {
        out.push((ConstantKind::Sp, inp.p, None));
        out.push((ConstantKind::S1, 1.0, None));
        out.push((ConstantKind::Kp, inp.p, None));
    }
    if inp.has(Regime::B0L2) {
        out.push((ConstantKind::Kp, b0_trace_exponent(inp), None));
    }
    if inp.has(Regime::MaxPrinciple) {
        let sigmas = [default_sigma(inp), 1.0];
        for s in sigmas {
            if let Some((p, q)) = sigma_constant_key(inp, s) {
                out.push((ConstantKind::Spq, p, Some(q)));
            }
        }
    }
    out.retain(|(k, p, _)| match k {
        ConstantKind::Sp | ConstantKind::Kp => *p >= 1.0 && *p < n,
        _ => true,
    });
    out
}

/// Populates analytic upper bounds for every constant the inputs need.
pub fn populate_analytic(reg: &mut SobolevRegistry, domain: &crate::domain::DomainSpec, inp: &BoundInputs) -> Result<()> {
    for (k, p, q) in required_constants(inp) {
        reg.add_analytic(domain, k, p, q)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Applicability {
    Applicable,
    /// Applicable, but at least one constant is a fallback estimate.
    Conditional,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub id: String,
    pub title: String,
    pub applicability: Applicability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub values: BTreeMap<String, f64>,
    pub constants: Vec<ConstantUse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallness: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundEntry {
    fn new(id: &str, title: &str) -> Self {
        BoundEntry {
            id: id.to_string(),
            title: title.to_string(),
            applicability: Applicability::Applicable,
            reason: None,
            values: BTreeMap::new(),
            constants: Vec::new(),
            smallness: None,
            notes: Vec::new(),
        }
    }

    fn inapplicable(id: &str, title: &str, err: &Error) -> Self {
        let mut e = Self::new(id, title);
        e.applicability = Applicability::Inapplicable;
        e.reason = Some(err.to_string());
        e
    }

    fn finish(mut self) -> Self {
        if self.applicability == Applicability::Applicable && is_conditional(&self.constants) {
            self.applicability = Applicability::Conditional;
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn is_usable(&self) -> bool {
        self.applicability != Applicability::Inapplicable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub regimes: Vec<Regime>,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn entry(&self, id: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesOptions {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

pub const ENERGY_L2: &str = "energy_l2";
pub const MAX_PRINCIPLE: &str = "max_principle";
pub const L1_DATA: &str = "l1_data";
pub const ENERGY_B0: &str = "energy_b0";
pub const L1_B0: &str = "l1_b0";
pub const MIN_PRINCIPLE: &str = "min_principle";

/// Evaluates every bound the inputs admit. Gated operations that refuse to
/// run produce an inapplicable entry with the reason.
pub fn evaluate(inp: &BoundInputs, reg: &SobolevRegistry, series: &SeriesOptions) -> BoundReport {
    let mut entries = Vec::new();

    // Exponent of the Gronwall factor, shared by the L² bounds.
    let q_res = gronwall_exponent(inp, reg);

    let title = "L2 energy bound, b_# > 0";
    entries.push(match q_res.as_ref().map(|q| (q, energy_bound(inp, q.value))) {
        Ok((q, Ok(b))) => {
            let mut e = BoundEntry::new(ENERGY_L2, title);
            e.values.insert("Q".into(), q.value);
            e.values.insert("Q_stated".into(), q.stated);
            e.values.insert("Q_derived".into(), q.derived);
            e.values.insert("B0".into(), b.b0);
            e.values.insert("rhs_Linf".into(), b.rhs_linf);
            e.values.insert("rhs_energy".into(), b.rhs_energy);
            e.constants = q.constants.clone();
            e.finish()
        }
        Ok((q, Err(err))) => {
            let mut e = BoundEntry::inapplicable(ENERGY_L2, title, &err);
            e.values.insert("Q".into(), q.value);
            e
        }
        Err(err) => BoundEntry::inapplicable(ENERGY_L2, title, err),
    });

    entries.push(max_principle_entry(inp, reg, series));

    let z = l1_data_mass(&inp.norms);
    entries.push(match l1_gradient_bound(inp, reg) {
        Ok(b) => {
            let mut e = BoundEntry::new(L1_DATA, "L1-data bounds, b_# > 0");
            e.values.insert("Z".into(), b.z);
            e.values.insert("Z1".into(), b.z1);
            e.values.insert("Z2".into(), b.z2);
            e.values.insert("B".into(), b.script_b);
            e.values.insert("rhs_gradient_p".into(), b.rhs_gradient_p);
            e.values.insert("rhs_l1".into(), b.z);
            e.constants = b.constants;
            e.finish()
        }
        Err(err) => {
            let mut e = BoundEntry::inapplicable(L1_DATA, "L1-data bounds, b_# > 0", &err);
            e.values.insert("Z".into(), z);
            e
        }
    });

    let title = "L2 energy bound, b_# = 0";
    let growth = if inp.b_lower == 0.0 { b0_energy_growth(inp) } else { Ok(()) };
    entries.push(match growth.and(Ok(q_res.as_ref())).map(|r| r.map(|q| (q, b0_energy_bound(inp, reg, q.value)))) {
        Err(err) => BoundEntry::inapplicable(ENERGY_B0, title, &err),
        Ok(r) => match r {
        Ok((q, Ok(b))) => {
            let mut e = BoundEntry::new(ENERGY_B0, title);
            e.values.insert("Q".into(), q.value);
            e.values.insert("A".into(), b.script_a);
            e.values.insert("rhs_Linf".into(), b.rhs_linf);
            e.values.insert("rhs_grad".into(), b.rhs_grad);
            e.constants = q.constants.clone();
            e.constants.extend(b.constants);
            e.finish()
        }
        Ok((_, Err(err))) => BoundEntry::inapplicable(ENERGY_B0, title, &err),
        Err(err) => BoundEntry::inapplicable(ENERGY_B0, title, err),
        },
    });

    entries.push(match b0_l1_gradient_bound(inp, reg) {
        Ok(b) => {
            let mut e = BoundEntry::new(L1_B0, "L1-data bounds, b_# = 0");
            e.values.insert("Z".into(), b.z);
            e.values.insert("B".into(), b.script_b);
            e.values.insert("beta".into(), b.beta);
            e.values.insert("alpha_l".into(), b.alpha_l);
            e.values.insert("beta_l".into(), b.beta_l);
            e.values.insert("rhs_gradient_p".into(), b.rhs_gradient_p);
            e.values.insert("rhs_l1".into(), b.z);
            e.constants = b.constants;
            e.smallness = Some(true);
            e.finish()
        }
        Err(err) => {
            let mut e = BoundEntry::inapplicable(L1_B0, "L1-data bounds, b_# = 0", &err);
            if matches!(err, Error::Inapplicable { .. }) {
                e.smallness = Some(false);
            }
            e
        }
    });

    let mut min = BoundEntry::new(MIN_PRINCIPLE, "minimum principle");
    min.values.insert("lower".into(), 0.0);
    if !inp.nonnegative_data {
        min.applicability = Applicability::Inapplicable;
        min.reason = Some("needs u0 ≥ 0, h ≥ 0 and f ≥ 0".into());
    } else if inp.b_lower < 0.0 {
        min.applicability = Applicability::Inapplicable;
        min.reason = Some("needs b_# ≥ 0".into());
    }
    entries.push(min);

    BoundReport {
        regimes: inp.regimes.clone(),
        entries,
    }
}

fn max_principle_entry(inp: &BoundInputs, reg: &SobolevRegistry, series: &SeriesOptions) -> BoundEntry {
    let title = "maximum principle";
    let params = match moser_params(inp, reg) {
        Ok(p) => p,
        Err(err) => return BoundEntry::inapplicable(MAX_PRINCIPLE, title, &err),
    };
    let mut e = BoundEntry::new(MAX_PRINCIPLE, title);
    e.values.insert("P".into(), params.p);
    e.values.insert("P_raw".into(), params.p_raw);
    e.values.insert("P1".into(), params.p1);
    e.values.insert("P2".into(), params.p2);
    e.values.insert("sigma".into(), params.sigma);
    e.values.insert("nu".into(), params.nu);
    e.values.insert("Cn".into(), params.cn);
    e.constants = params.constants.clone();
    e.notes.extend(params.warnings.iter().cloned());
    e.smallness = Some(params.smallness);
    if !params.smallness {
        e.applicability = Applicability::Inapplicable;
        e.reason = Some(format!("smallness condition P2 ≤ P fails ({} > {})", params.p2, params.p));
        return e;
    }
    let base = match moser_base_from_energy(inp, reg, &mut e.constants) {
        Ok(b) => b,
        Err(err) => {
            e.applicability = Applicability::Inapplicable;
            e.reason = Some(err.to_string());
            return e;
        }
    };
    match moser_series(params.p, params.p1, params.p2, params.chi, base, series) {
        Ok(s) => {
            e.values.insert("M".into(), s.value);
            e.values.insert("M_leading".into(), s.leading);
            e.values.insert("terms".into(), s.terms_used as f64);
            if s.divergent {
                e.notes.push(format!("partial sum of {} terms reported as M", s.terms_used));
                e.applicability = Applicability::Inapplicable;
                e.reason = Some(format!("divergent series: its terms tend to P1 = {} > 0", params.p1));
            } else {
                e.values.insert("boundary_max".into(), boundary_max_bound(s.value, params.p1, inp.b_lower).unwrap_or(f64::NAN));
            }
        }
        Err(err) => {
            e.applicability = Applicability::Inapplicable;
            e.reason = Some(err.to_string());
        }
    }
    e.finish()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Unit-measure inputs with all data zero; tests override what they need.
    pub fn unit_inputs(n: usize, regimes: &[Regime]) -> BoundInputs {
        BoundInputs {
            n,
            vol_omega: 1.0,
            area_gamma: 1.0,
            horizon: 1.0,
            a_lower: 1.0,
            a_upper: 1.0,
            b_lower: 1.0,
            b_upper: 1.0,
            ell: 2.0,
            p: 1.2,
            q: 8.0,
            r: 8.0,
            theta: if n == 2 { 0.375 } else { 0.0 },
            two_star: 4.0,
            norms: DataNorms {
                f_is_zero: true,
                ..Default::default()
            },
            regimes: regimes.to_vec(),
            nonnegative_data: true,
            sigma_override: None,
        }
    }

    pub fn unit_registry(n: usize) -> SobolevRegistry {
        let mut reg = SobolevRegistry {
            fingerprint: format!("test{n}"),
            entries: Vec::new(),
        };
        for (k, p, q) in [
            (ConstantKind::Sp, 1.0, None),
            (ConstantKind::Sp, 1.1, None),
            (ConstantKind::Sp, 1.2, None),
            (ConstantKind::Sp, 2.0, None),
            (ConstantKind::S1, 1.0, None),
            (ConstantKind::Kp, 1.0, None),
            (ConstantKind::Kp, 1.2, None),
            (ConstantKind::Kp, 1.6, None),
            (ConstantKind::Kp, 2.0, None),
            (ConstantKind::Spq, 2.0, Some(2.0)),
        ] {
            reg.insert_user(k, p, q, 1.0).unwrap();
        }
        reg
    }

    #[test]
    fn gating_names_regimes() {
        let inp = unit_inputs(2, &[Regime::None]);
        let err = inp.require("op", &[Regime::L2Theory]).unwrap_err();
        assert!(err.to_string().contains("L2-theory"));
    }

    #[test]
    fn report_marks_every_entry_inapplicable_without_regimes() {
        let inp = unit_inputs(2, &[Regime::None]);
        let rep = evaluate(&inp, &unit_registry(2), &SeriesOptions::default());
        for e in &rep.entries {
            if e.id != MIN_PRINCIPLE {
                assert_eq!(e.applicability, Applicability::Inapplicable, "{}", e.id);
            }
        }
    }

    #[test]
    fn report_uses_fallback_as_conditional() {
        let mut inp = unit_inputs(3, &[Regime::L2Theory]);
        inp.q = 6.0;
        inp.theta = 0.0;
        let mut reg = SobolevRegistry {
            fingerprint: "t".into(),
            entries: Vec::new(),
        };
        reg.insert(crate::sobolev::ConstantEstimate::new(ConstantKind::Sp, 2.0, None, 0.5, Provenance::NumericLower))
            .unwrap();
        inp.norms.e_q2 = 1.0;
        inp.norms.e_gronwall = 1.0;
        let rep = evaluate(&inp, &reg, &SeriesOptions::default());
        let e = rep.entry(ENERGY_L2).unwrap();
        assert_eq!(e.applicability, Applicability::Conditional);
        assert_eq!(e.constants[0].value, 1.0);
    }
}
