//! Bounds for L¹ data: the mass `𝒵`, the gradient bound `ℬ` and the
//! trace estimates used for b_# = 0.

use serde::{Deserialize, Serialize};

use super::{finite, upper, BoundInputs, ConstantUse};
use crate::error::{inapplicable, precondition, Result};
use crate::problem::{DataNorms, Regime};
use crate::quadrature::compensated_sum;
use crate::sobolev::{trace_exponent, ConstantKind, SobolevRegistry};

/// `𝒵 = ‖u₀‖₁ + ‖f‖_{1,Q_T} + ‖h‖_{1,Σ_T}`
pub fn l1_data_mass(norms: &DataNorms) -> f64 {
    compensated_sum([norms.u0_l1, norms.f_l1, norms.h_l1])
}

/// `Z₁ = S_p(1 + |Ω|^{1/n} S₁)` and `Z₂ = S_p S₁ T^{1/p} |Ω|^{1/p+1/n-1}`.
pub fn l1_constants(sp: f64, s1: f64, p: f64, n: usize, vol: f64, horizon: f64) -> (f64, f64) {
    let nf = n as f64;
    let z1 = sp * (1.0 + vol.powf(1.0 / nf) * s1);
    let z2 = sp * s1 * horizon.powf(1.0 / p) * vol.powf(1.0 / p + 1.0 / nf - 1.0);
    (z1, z2)
}

fn lookup_l1_constants(inp: &BoundInputs, reg: &SobolevRegistry, uses: &mut Vec<ConstantUse>) -> Result<(f64, f64, f64)> {
    let sp = upper(reg, uses, ConstantKind::Sp, inp.p, None)?;
    let s1 = upper(reg, uses, ConstantKind::S1, 1.0, None)?;
    let (z1, z2) = l1_constants(sp, s1, inp.p, inp.n, inp.vol_omega, inp.horizon);
    Ok((s1, z1, z2))
}

/// Coefficient `r n² (Z₁^{2-p} 𝒵^{(2-p)/n} + 1) / (a_# (n+2-p(n+1)) (n-1))`.
pub fn gradient_coefficient(inp: &BoundInputs, z1: f64, z: f64) -> f64 {
    let (n, p) = (inp.nf(), inp.p);
    inp.r * n * n * (z1.powf(2.0 - p) * z.powf((2.0 - p) / n) + 1.0) / (inp.a_lower * (n + 2.0 - p * (n + 1.0)) * (n - 1.0))
}

/// The four-term constant `ℬ`.
pub fn script_b(inp: &BoundInputs, z: f64, z1: f64, z2: f64) -> f64 {
    let (n, p, r, a) = (inp.nf(), inp.p, inp.r, inp.a_lower);
    let e = inp.norms.e_qr;
    let tv = inp.horizon * inp.vol_omega;
    let t1 = r * (tv + z2.powf(p) * z.powf(p * (n + 1.0) / n));
    let t2 = gradient_coefficient(inp, z1, z) * (tv + 2.0 * z);
    let (t3, t4) = if e == 0.0 {
        (0.0, 0.0)
    } else {
        let t3 = r / (2.0 * a * a) * e * e * z2.powf(p * (r - 2.0) / r) * (z1.powf(2.0 - p) * z.powf(p) + z.powf((p * (n + 1.0) - 2.0) / n));
        let t4 = 2f64.powf((r - 2.0) / 2.0) / a.powf(r)
            * e.powf(r)
            * (z1.powf(r - p) * z.powf(p) + z1.powf(p * (r - 2.0) / 2.0) * z.powf(p - r * (2.0 - p) / (2.0 * n)));
        (t3, t4)
    };
    compensated_sum([t1, t2, t3, t4])
}

fn check_l1_exponents(op: &'static str, inp: &BoundInputs) -> Result<()> {
    let (n, p, q, r) = (inp.nf(), inp.p, inp.q, inp.r);
    let pqrn = n / q + (p * (n + 1.0) - n) / r;
    if (pqrn - 1.0).abs() > 1e-9 {
        return Err(precondition(op, format!("n/q + (p(n+1) - n)/r = {pqrn:.6} must equal 1")));
    }
    if !(p > 1.0 && p < (n + 2.0) / (n + 1.0)) {
        return Err(precondition(op, format!("needs 1 < p < (n+2)/(n+1), got p = {p}")));
    }
    if r * (2.0 - p) >= 2.0 * n * p {
        return Err(precondition(op, format!("needs r(2-p) < 2np, got {} ≥ {}", r * (2.0 - p), 2.0 * n * p)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1GradientBound {
    /// Also the bound for `‖u‖_{1,∞} + b_# ‖u‖^{ℓ-1}_{ℓ-1,Σ_T}`.
    pub z: f64,
    pub z1: f64,
    pub z2: f64,
    pub script_b: f64,
    /// Bound for `‖∇u‖^p_{p,Q_T}`.
    pub rhs_gradient_p: f64,
    pub constants: Vec<ConstantUse>,
}

/// Gradient bound for L¹ data with `b_# > 0`.
pub fn l1_gradient_bound(inp: &BoundInputs, reg: &SobolevRegistry) -> Result<L1GradientBound> {
    inp.require("l1_gradient_bound", &[Regime::L1Theory])?;
    check_l1_exponents("l1_gradient_bound", inp)?;
    if inp.b_lower <= 0.0 {
        return Err(precondition("l1_gradient_bound", "needs b_# > 0 (use the b_# = 0 bound)"));
    }
    let mut constants = Vec::new();
    let (_, z1, z2) = lookup_l1_constants(inp, reg, &mut constants)?;
    let z = l1_data_mass(&inp.norms);
    let b = script_b(inp, z, z1, z2);
    let rhs = b + gradient_coefficient(inp, z1, z) * (inp.b_upper / inp.b_lower) * z;
    Ok(L1GradientBound {
        z,
        z1,
        z2,
        script_b: finite("B", b)?,
        rhs_gradient_p: finite("rhs_gradient_p", rhs)?,
        constants,
    })
}

/// `(α_ℓ, β_ℓ)` from β. Fails with `Inapplicable` when ℓ = p+1 and β ≥ 2^{1-2p}.
pub fn alpha_beta(ell: f64, p: f64, beta: f64) -> Result<(f64, f64)> {
    if (ell - (p + 1.0)).abs() <= 1e-12 {
        let cap = 2f64.powf(1.0 - 2.0 * p);
        if beta < cap {
            Ok((0.0, 1.0 / (1.0 - 2f64.powf(2.0 * p - 1.0) * beta)))
        } else {
            Err(inapplicable(
                "b0_l1_gradient_bound",
                format!("smallness condition β < 2^(1-2p) fails: β = {beta} ≥ {cap}"),
            ))
        }
    } else if ell < p + 1.0 {
        let e = p / (p - ell + 1.0);
        Ok(((2f64.powf(2.0 * ell - 3.0) * beta).powf(e), e))
    } else {
        Err(precondition("alpha_beta", format!("needs ℓ ≤ p+1, got ℓ = {ell}, p = {p}")))
    }
}

/// `S₁^{n(p-1)/(n-p(n-1))} |Ω|^{n(p-1)²/((n-p(n-1))p)} + S₁^{n(p-1)/p}`
fn trace_mass_factor(s1: f64, p: f64, n: f64, vol: f64) -> f64 {
    let d = n - p * (n - 1.0);
    s1.powf(n * (p - 1.0) / d) * vol.powf(n * (p - 1.0).powi(2) / (d * p)) + s1.powf(n * (p - 1.0) / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B0L1GradientBound {
    pub z: f64,
    pub script_b: f64,
    pub beta: f64,
    pub alpha_l: f64,
    pub beta_l: f64,
    pub rhs_gradient_p: f64,
    pub constants: Vec<ConstantUse>,
}

/// Gradient bound for L¹ data with `b_# = 0` and `2 ≤ ℓ ≤ p+1`.
pub fn b0_l1_gradient_bound(inp: &BoundInputs, reg: &SobolevRegistry) -> Result<B0L1GradientBound> {
    inp.require("b0_l1_gradient_bound", &[Regime::B0L1])?;
    check_l1_exponents("b0_l1_gradient_bound", inp)?;
    let (n, p, ell) = (inp.nf(), inp.p, inp.ell);
    if !(ell >= 2.0 && ell <= p + 1.0 + 1e-12) {
        return Err(precondition("b0_l1_gradient_bound", format!("needs 2 ≤ ℓ ≤ p+1, got ℓ = {ell}")));
    }
    let mut constants = Vec::new();
    let (s1, z1, z2) = lookup_l1_constants(inp, reg, &mut constants)?;
    let z = l1_data_mass(&inp.norms);
    let b = script_b(inp, z, z1, z2);
    let beta = if inp.b_upper == 0.0 {
        0.0
    } else {
        let kp = upper(reg, &mut constants, ConstantKind::Kp, p, None)?;
        let ps = trace_exponent(p, inp.n);
        inp.b_upper
            * inp.horizon.powf(1.0 - (ell - 1.0) / p)
            * inp.area_gamma.powf(1.0 - (ell - 1.0) / ps)
            * kp.powf(ell - 1.0)
            * gradient_coefficient(inp, z1, z)
    };
    let (alpha_l, beta_l) = alpha_beta(ell, p, beta)?;
    let extra = if beta == 0.0 {
        0.0
    } else {
        2f64.powf(ell - 2.0) * beta * (trace_mass_factor(s1, p, n, inp.vol_omega) * inp.horizon * z).powf(ell - 1.0)
    };
    let rhs = alpha_l + beta_l * (b + extra);
    Ok(B0L1GradientBound {
        z,
        script_b: finite("B", b)?,
        beta,
        alpha_l,
        beta_l,
        rhs_gradient_p: finite("rhs_gradient_p", rhs)?,
        constants,
    })
}

/// Exponents of the mixed-norm embedding into `L^{p̄,q̄}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedExponents {
    pub p1: f64,
    pub pbar: f64,
    pub qbar: f64,
}

/// Bound for `‖v‖_{p̄,q̄,Q_T}` from `‖∇v‖_{p,p₁,Q_T}` and `‖v‖_{1,∞,Q_T}`.
pub fn mixed_embedding_bound(inp: &BoundInputs, reg: &SobolevRegistry, ex: MixedExponents, grad_norm: f64, linf_l1: f64) -> Result<(f64, Vec<ConstantUse>)> {
    let op = "mixed_embedding_bound";
    let (n, p) = (inp.nf(), inp.p);
    if !(p >= 1.0 && p <= n / (n - 1.0)) {
        return Err(precondition(op, format!("needs 1 ≤ p ≤ n/(n-1), got p = {p}")));
    }
    let lambda = ex.p1 / ex.qbar;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(precondition(op, format!("needs 0 < p₁/q̄ < 1, got {lambda}")));
    }
    let rel = 1.0 / ex.pbar + lambda * (1.0 + 1.0 / n - 1.0 / p);
    if (rel - 1.0).abs() > 1e-9 {
        return Err(precondition(op, format!("1/p̄ + (p₁/q̄)(1 + 1/n - 1/p) = {rel} must equal 1")));
    }
    if grad_norm < 0.0 || linf_l1 < 0.0 {
        return Err(precondition(op, "norms must be nonnegative"));
    }
    let mut uses = Vec::new();
    let sp = upper(reg, &mut uses, ConstantKind::Sp, p, None)?;
    let s1 = upper(reg, &mut uses, ConstantKind::S1, 1.0, None)?;
    let vol = inp.vol_omega;
    let first = (sp * (1.0 + vol.powf(1.0 / n) * s1)).powf(lambda) * grad_norm.powf(lambda) * linf_l1.powf(1.0 - lambda);
    let second = (sp * s1).powf(lambda) * inp.horizon.powf(1.0 / ex.qbar) * vol.powf(lambda * (1.0 / p + 1.0 / n - 1.0)) * linf_l1;
    Ok((first + second, uses))
}

/// Bound for `∫_{Σ_T} |v|^{ℓ-1}` from `‖∇v‖^p_{p,Q_T}` and `‖v‖_{1,∞,Q_T}`.
pub fn trace_power_bound(inp: &BoundInputs, reg: &SobolevRegistry, grad_norm_p: f64, l1_norm: f64) -> Result<(f64, Vec<ConstantUse>)> {
    let op = "trace_power_bound";
    let (n, p, ell) = (inp.nf(), inp.p, inp.ell);
    if p * (n - 1.0) >= n || p < 1.0 {
        return Err(precondition(op, format!("needs 1 ≤ p and p(n-1) < n, got p = {p}")));
    }
    if ell > p + 1.0 + 1e-12 {
        return Err(precondition(op, format!("needs ℓ ≤ p+1, got ℓ = {ell}")));
    }
    if grad_norm_p < 0.0 || l1_norm < 0.0 {
        return Err(precondition(op, "norms must be nonnegative"));
    }
    let mut uses = Vec::new();
    let kp = upper(reg, &mut uses, ConstantKind::Kp, p, None)?;
    let s1 = upper(reg, &mut uses, ConstantKind::S1, 1.0, None)?;
    let ps = trace_exponent(p, inp.n);
    let inner = 2.0 * grad_norm_p + trace_mass_factor(s1, p, n, inp.vol_omega) * l1_norm;
    let v = inp.horizon.powf(1.0 - (ell - 1.0) / p) * inp.area_gamma.powf(1.0 - (ell - 1.0) / ps) * kp.powf(ell - 1.0) * inner.powf(ell - 1.0);
    Ok((v, uses))
}
