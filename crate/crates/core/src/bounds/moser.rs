//! Constants of the iteration behind the maximum principle.

use serde::{Deserialize, Serialize};

use super::{energy_bound, gronwall_exponent, upper, BoundInputs, ConstantUse, SeriesOptions};
use crate::error::{precondition, Result};
use crate::problem::Regime;
use crate::quadrature::NeumaierSum;
use crate::sobolev::{ConstantKind, SobolevRegistry};

/// σ used by the maximum principle: `1 + (2/n)(1 - 2/r - n/q)`.
pub fn default_sigma(inp: &BoundInputs) -> f64 {
    inp.sigma_override.unwrap_or_else(|| 1.0 + 2.0 / inp.nf() * (1.0 - 2.0 / inp.r - inp.nf() / inp.q))
}

/// Whether σ lies in the range where the mixed-norm embedding holds.
pub fn sigma_admissible(n: usize, q: f64, r: f64, sigma: f64) -> bool {
    let nf = n as f64;
    let mut ok = sigma > 1.0 - 2.0 / q && sigma <= 1.0 + 2.0 * (1.0 - nf / q - 2.0 / r) / nf + 1e-12;
    if n > 2 {
        ok &= sigma <= nf * (q - 2.0) / (q * (nf - 2.0)) + 1e-12;
    } else {
        ok &= sigma > 2.0 / q - 2.0 / r;
    }
    ok
}

/// True when the cap `n(q-2)/(q(n-2))` does not cut below the upper end of
/// the σ range, i.e. `n/q + (2-n)/r ≤ 1`.
pub fn sigma_cap_inactive(n: usize, q: f64, r: f64) -> bool {
    let nf = n as f64;
    nf / q + (2.0 - nf) / r <= 1.0 + 1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEmbedding {
    pub sigma: f64,
    pub nu: f64,
    /// Infinite when the exponent ν vanishes in two dimensions.
    pub cn: f64,
    /// Intermediate Lebesgue exponent used in two dimensions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    pub admissible: bool,
    pub constants: Vec<ConstantUse>,
}

/// Key `(p, q)` of the `S_{p,q}` constant needed at σ, if any.
pub(crate) fn sigma_constant_key(inp: &BoundInputs, sigma: f64) -> Option<(f64, f64)> {
    if inp.n > 2 {
        return Some((2.0, 2.0));
    }
    let (nu, s) = two_dim_exponents(inp.q, inp.r, sigma);
    if nu <= 0.0 {
        return None;
    }
    let t = 2.0 * s / (s + 2.0);
    Some((t, t))
}

fn two_dim_exponents(q: f64, r: f64, sigma: f64) -> (f64, f64) {
    let nu = (1.0 - 1.0 / q - 1.0 / r) / sigma - 0.5;
    let s = 2.0 + 4.0 / nu * (0.5 - (0.5 - 1.0 / q) / sigma);
    (nu, s)
}

/// Exponent `ν(σ)` and constant `C_n(σ)` of
/// `‖w‖²_{2σq/(q-2), 2σr/(r-2)} ≤ T^ν (‖w‖²_{2,∞} + C_n(‖∇w‖²_2 + ‖w‖²_{2,Σ}))`.
pub fn sigma_embedding(inp: &BoundInputs, reg: &SobolevRegistry, sigma: f64, q: f64, r: f64) -> Result<SigmaEmbedding> {
    if !(q > 2.0 && r > 2.0) {
        return Err(precondition("sigma_embedding", format!("needs q, r > 2, got q = {q}, r = {r}")));
    }
    let n = inp.nf();
    let admissible = sigma_admissible(inp.n, q, r, sigma);
    let mut constants = Vec::new();
    if inp.n > 2 {
        let nu = (1.0 - n / q - 2.0 / r) / sigma + n * (1.0 / sigma - 1.0) / 2.0;
        let s22 = upper(reg, &mut constants, ConstantKind::Spq, 2.0, Some(2.0))?;
        return Ok(SigmaEmbedding {
            sigma,
            nu,
            cn: 2.0 * s22 * s22,
            s: None,
            admissible,
            constants,
        });
    }
    let (nu, s) = two_dim_exponents(q, r, sigma);
    if nu <= 0.0 {
        return Ok(SigmaEmbedding {
            sigma,
            nu,
            cn: f64::INFINITY,
            s: None,
            admissible,
            constants,
        });
    }
    let t = 2.0 * s / (s + 2.0);
    let st = upper(reg, &mut constants, ConstantKind::Spq, t, Some(t))?;
    let cn = 2.0 * st * st * (inp.vol_omega.powf(1.0 / s) + inp.area_gamma.powf(1.0 / s));
    Ok(SigmaEmbedding {
        sigma,
        nu,
        cn,
        s: Some(s),
        admissible,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub sigma: f64,
    pub chi: f64,
    pub nu: f64,
    pub cn: f64,
    /// P after clamping to 1.
    pub p: f64,
    pub p_raw: f64,
    pub p1: f64,
    pub p2: f64,
    /// `P₂ ≤ P`
    pub smallness: bool,
    pub warnings: Vec<String>,
    pub constants: Vec<ConstantUse>,
}

pub fn moser_params(inp: &BoundInputs, reg: &SobolevRegistry) -> Result<MoserParams> {
    inp.require("moser_params", &[Regime::MaxPrinciple])?;
    let (a, b) = (inp.a_lower, inp.b_lower);
    if b <= 0.0 {
        return Err(precondition("moser_params", "needs b_# > 0"));
    }
    if !(inp.norms.u0_linf.is_finite() && inp.norms.h_linf.is_finite()) {
        return Err(precondition("moser_params", "u0 and h must be bounded"));
    }
    let sigma = default_sigma(inp);
    let emb = sigma_embedding(inp, reg, sigma, inp.q, inp.r)?;
    let mut warnings = Vec::new();
    if !emb.admissible {
        warnings.push(format!("σ = {sigma} lies outside the admissible range"));
    }
    if !emb.cn.is_finite() {
        warnings.push(format!(
            "C_n(σ) is infinite since ν(σ) = {} ≤ 0; choose a smaller σ to obtain a finite bound",
            emb.nu
        ));
    }
    let tnu = inp.horizon.powf(emb.nu);
    let c = emb.cn.max(1.0);
    let m = 1f64.min(a).min(b);
    let p_raw = if inp.norms.e_qr == 0.0 {
        0.0
    } else {
        (2.0 * tnu * c / (a * m)).sqrt() * inp.norms.e_qr
    };
    let p = if p_raw < 1.0 {
        warnings.push(format!("P = {p_raw} clamped to 1"));
        1.0
    } else {
        p_raw
    };
    let p1 = 1f64.max(inp.norms.u0_linf).max(inp.norms.h_linf).sqrt();
    let p2 = (tnu * c / m * (inp.vol_omega + (b * (inp.ell - 2.0) + 1f64.max(1.0 / b)) * inp.sigma_t())).sqrt();
    Ok(MoserParams {
        sigma,
        chi: 1.0 / sigma,
        nu: emb.nu,
        cn: emb.cn,
        p,
        p_raw,
        p1,
        p2,
        smallness: p2 <= p,
        warnings,
        constants: emb.constants,
    })
}

/// `T^{ν/2} (‖u‖²_{2,∞} + C (‖∇u‖²_2 + ‖u‖²_{2,Σ}))^{1/2}`
pub fn moser_base_norm(horizon: f64, nu: f64, c: f64, linf_l2_sq: f64, grad_sq: f64, trace_sq: f64) -> f64 {
    (horizon.powf(nu) * (linf_l2_sq + c * (grad_sq + trace_sq))).sqrt()
}

/// Base norm of the iteration at σ = 1, bounded through the energy estimate.
pub fn moser_base_from_energy(inp: &BoundInputs, reg: &SobolevRegistry, uses: &mut Vec<ConstantUse>) -> Result<f64> {
    let emb = sigma_embedding(inp, reg, 1.0, inp.q, inp.r)?;
    uses.extend(emb.constants.iter().cloned());
    let q = gronwall_exponent(inp, reg)?;
    uses.extend(q.constants.iter().cloned());
    let e = energy_bound(inp, q.value)?;
    let grad_sq = e.rhs_energy / inp.a_lower;
    // ‖u‖²_{2,Σ_T} ≤ |Σ_T|^{1-2/ℓ} ‖u‖²_{ℓ,Σ_T}
    let trace_sq = inp.sigma_t().powf(1.0 - 2.0 / inp.ell) * (e.rhs_energy / inp.b_lower).powf(2.0 / inp.ell);
    Ok(moser_base_norm(inp.horizon, emb.nu, emb.cn, e.rhs_linf, grad_sq, trace_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserSeries {
    /// `ℳ`: leading term plus the partial series.
    pub value: f64,
    pub leading: f64,
    pub series: f64,
    pub converged: bool,
    /// The general term does not tend to zero (exactly when P₁ > 0).
    pub divergent: bool,
    pub terms_used: usize,
}

/// Leading term `P^{1/(1-χ)} χ^{-χ/(1-χ)²} base` plus
/// `P₁ Σ_i P^{χ^{i+1}/(1-χ)} χ^{(iχ^{i+2}-(i+1)χ^{i+1})/(1-χ)²} P₂^{χ^i}`.
pub fn moser_series(p: f64, p1: f64, p2: f64, chi: f64, base: f64, opts: &SeriesOptions) -> Result<MoserSeries> {
    let op = "moser_series";
    if !(p.is_finite() && p >= 1.0) {
        return Err(precondition(op, format!("needs P ≥ 1, got {p}")));
    }
    if !(p2 > 0.0 && p2 <= p) {
        return Err(precondition(op, format!("needs 0 < P2 ≤ P, got P2 = {p2}, P = {p}")));
    }
    if !(chi > 0.0 && chi < 1.0) {
        return Err(precondition(op, format!("needs 0 < χ < 1, got {chi}")));
    }
    if !(p1 >= 0.0 && base >= 0.0 && p1.is_finite() && base.is_finite()) {
        return Err(precondition(op, "P1 and the base norm must be finite and nonnegative"));
    }
    let omc = 1.0 - chi;
    let (lp, lc, lp2) = (p.ln(), chi.ln(), p2.ln());
    let leading = (lp / omc - chi / (omc * omc) * lc).exp() * base;
    if p1 == 0.0 {
        return Ok(MoserSeries {
            value: leading,
            leading,
            series: 0.0,
            converged: true,
            divergent: false,
            terms_used: 0,
        });
    }
    // Every exponent in the general term tends to zero, so the terms tend to
    // P₁ and the series diverges whenever P₁ > 0. The partial sum is still
    // reported; it stops when a term falls below `tol` times the sum, which
    // here only means the remaining growth is linear, or at `max_terms`.
    let mut sum = NeumaierSum::default();
    let mut used = 0;
    let mut ci = 1.0; // χ^i
    for i in 0..opts.max_terms {
        let fi = i as f64;
        let ci1 = ci * chi;
        let ci2 = ci1 * chi;
        let log_t = ci1 / omc * lp + (fi * ci2 - (fi + 1.0) * ci1) / (omc * omc) * lc + ci * lp2;
        let t = p1 * log_t.exp();
        sum.add(t);
        used = i + 1;
        if t < opts.tol * sum.value() {
            break;
        }
        ci = ci1;
    }
    let series = sum.value();
    Ok(MoserSeries {
        value: leading + series,
        leading,
        series,
        converged: false,
        divergent: true,
        terms_used: used,
    })
}

/// Bound on the boundary trace: `(ℳ + P₁)/b_#`.
pub fn boundary_max_bound(m: f64, p1: f64, b_lower: f64) -> Result<f64> {
    if b_lower <= 0.0 {
        return Err(precondition("boundary_max_bound", "needs b_# > 0"));
    }
    Ok((m + p1) / b_lower)
}
