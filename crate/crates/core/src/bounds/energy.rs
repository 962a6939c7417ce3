//! L² energy bounds and the Gronwall exponent.

use serde::{Deserialize, Serialize};

use super::{finite, upper, BoundInputs, ConstantUse};
use crate::error::{precondition, Result};
use crate::problem::Regime;
use crate::quadrature::compensated_sum;
use crate::sobolev::{ConstantKind, SobolevRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallExponent {
    /// Larger of the two evaluations; used by every check.
    pub value: f64,
    /// Closed form attached to the energy bound.
    pub stated: f64,
    /// Form obtained at the end of the energy-estimate derivation.
    pub derived: f64,
    pub constants: Vec<ConstantUse>,
}

/// The exponent `𝒬` of the Gronwall factor `exp(𝒬)`.
///
/// Both published forms are evaluated: they group the exponents differently
/// (`(q+n+θq)` against `(1+n/q+θ)·q`) and scale `|Ω|` as `|Ω|^θ` against
/// `|Ω|^{2θ/n}`. They agree whenever n = 2 or θ = 0; the larger is returned.
pub fn gronwall_exponent(inp: &BoundInputs, reg: &SobolevRegistry) -> Result<GronwallExponent> {
    inp.require("gronwall_exponent", &[Regime::L2Theory, Regime::B0L2])?;
    let (n, q, theta, a) = (inp.nf(), inp.q, inp.theta, inp.a_lower);
    let denom = q - n - theta * q;
    if denom <= 0.0 {
        return Err(precondition(
            "gronwall_exponent",
            format!("q - n - θq = {denom} must be positive"),
        ));
    }
    let mut constants = Vec::new();
    let e2 = inp.norms.e_q2;
    let eg = inp.norms.e_gronwall;
    if e2 == 0.0 && eg == 0.0 {
        return Ok(GronwallExponent {
            value: 0.0,
            stated: 0.0,
            derived: 0.0,
            constants,
        });
    }
    let tq = theta * q;
    let s_index = (2.0 + tq) / (1.0 + tq);
    let s = upper(reg, &mut constants, ConstantKind::Sp, s_index, None)?;
    let vol = inp.vol_omega;

    // All factors are combined in log space: (4/a)^{q+n+θq} overflows easily.
    let term2 = |log_inner: f64, outer: f64| -> f64 {
        if eg == 0.0 {
            0.0
        } else {
            (log_inner * outer + eg.ln()).exp()
        }
    };

    let stated_1 = 2.0 / a * s.powf(2.0 * (n + tq) / q) * vol.powf(theta) * e2 * e2;
    let log_inner = (q + n + tq) * (4.0 / a).ln() + 2.0 * (n + tq) * s.ln() + q * theta * vol.ln();
    let stated_2 = term2(log_inner, 1.0 / denom);
    let stated = compensated_sum([stated_1, stated_2]);

    let derived_1 = 2.0 / a * s.powf(2.0 * (n / q + theta)) * vol.powf(2.0 * theta / n) * e2 * e2;
    let log_inner = (1.0 + n / q + theta) * (4.0 / a).ln() + 2.0 * (n / q + theta) * s.ln() + 2.0 * theta / n * vol.ln();
    let derived_2 = term2(log_inner, q / denom);
    let derived = compensated_sum([derived_1, derived_2]);

    Ok(GronwallExponent {
        value: finite("Q", stated.max(derived))?,
        stated,
        derived,
        constants,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBound {
    pub b0: f64,
    /// Bound for `‖u‖²_{2,∞,Q_T}`.
    pub rhs_linf: f64,
    /// Bound for `a_# ‖∇u‖²_{2,Q_T} + b_# ‖u‖^ℓ_{ℓ,Σ_T}`.
    pub rhs_energy: f64,
}

/// Energy bound for `b_# > 0` and `f ≡ 0`, given the Gronwall exponent.
pub fn energy_bound(inp: &BoundInputs, q: f64) -> Result<EnergyBound> {
    inp.require("energy_bound", &[Regime::L2Theory])?;
    if inp.b_lower <= 0.0 {
        return Err(precondition("energy_bound", "needs b_# > 0 (use the b_# = 0 bound)"));
    }
    if !inp.norms.f_is_zero {
        return Err(precondition("energy_bound", "needs f ≡ 0"));
    }
    energy_bound_formula(inp.norms.u0_l2, inp.norms.h_ellprime_pow, inp.ell, inp.b_lower, q)
}

/// `B₀ = ‖u₀‖² + 2/(ℓ' b_#^{1/(ℓ-1)}) ‖h‖^{ℓ'}_{ℓ'}`, `B₀ e^𝒬`, `B₀(𝒬 e^𝒬 + 1)`.
pub fn energy_bound_formula(u0_l2: f64, h_ellprime_pow: f64, ell: f64, b_lower: f64, q: f64) -> Result<EnergyBound> {
    let lp = ell / (ell - 1.0);
    let b0 = u0_l2 * u0_l2 + 2.0 / (lp * b_lower.powf(1.0 / (ell - 1.0))) * h_ellprime_pow;
    let eq = q.exp();
    Ok(EnergyBound {
        b0,
        rhs_linf: finite("rhs_Linf", b0 * eq)?,
        rhs_energy: finite("rhs_energy", b0 * (q * eq + 1.0))?,
    })
}

/// Trace exponent `s` of the b_# = 0 energy bound.
pub fn b0_trace_exponent(inp: &BoundInputs) -> f64 {
    if inp.n > 2 {
        2.0
    } else {
        2.0 * inp.two_star / (inp.two_star + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B0EnergyBound {
    pub script_a: f64,
    /// Bound for `‖u‖_{2,∞,Q_T}` (not squared).
    pub rhs_linf: f64,
    /// Bound for `‖∇u‖²_{2,Q_T}`.
    pub rhs_grad: f64,
    pub constants: Vec<ConstantUse>,
}

/// Growth hypothesis of the b_# = 0 energy bound.
pub fn b0_energy_growth(inp: &BoundInputs) -> Result<()> {
    if inp.ell > 3.0 {
        return Err(precondition("b0_energy_bound", format!("needs 2 ≤ ℓ ≤ 3, got ℓ = {} (ℓ > 3)", inp.ell)));
    }
    if inp.ell < 2.0 {
        return Err(precondition("b0_energy_bound", format!("needs 2 ≤ ℓ ≤ 3, got ℓ = {} (ℓ < 2)", inp.ell)));
    }
    Ok(())
}

/// Energy bound for `b_# = 0`, `2 ≤ ℓ ≤ 3`.
pub fn b0_energy_bound(inp: &BoundInputs, reg: &SobolevRegistry, q: f64) -> Result<B0EnergyBound> {
    b0_energy_growth(inp)?;
    inp.require("b0_energy_bound", &[Regime::B0L2])?;
    let mut constants = Vec::new();
    let s = b0_trace_exponent(inp);
    let h = inp.norms.h_two_star_dual;
    let mut a2 = inp.norms.u0_l2.powi(2);
    if h != 0.0 {
        let ks = upper(reg, &mut constants, ConstantKind::Kp, s, None)?;
        a2 += (2.0 / inp.a_lower + 1.0) * ks * ks * inp.vol_omega.powf(2.0 / s - 1.0) * h * h;
    }
    let (linf, grad) = b0_energy_formula(a2.sqrt(), q, inp.horizon, inp.a_lower);
    Ok(B0EnergyBound {
        script_a: a2.sqrt(),
        rhs_linf: finite("rhs_Linf", linf)?,
        rhs_grad: finite("rhs_grad", grad)?,
        constants,
    })
}

/// `𝒜 √exp(𝒬+T)` and `2𝒜²((𝒬+T) exp(𝒬+T) + 1)/a_#`.
pub fn b0_energy_formula(script_a: f64, q: f64, t: f64, a_lower: f64) -> (f64, f64) {
    let x = q + t;
    (script_a * (0.5 * x).exp(), 2.0 * script_a * script_a * (x * x.exp() + 1.0) / a_lower)
}

/// `a^λ b^{1-λ}`: the interpolation inequality between mixed norms.
pub fn interpolation_bound(norm_a: f64, norm_b: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(precondition("interpolation_bound", format!("λ = {lambda} outside [0, 1]")));
    }
    if norm_a < 0.0 || norm_b < 0.0 {
        return Err(precondition("interpolation_bound", "norms must be nonnegative"));
    }
    if lambda == 1.0 {
        return Ok(norm_a);
    }
    if lambda == 0.0 {
        return Ok(norm_b);
    }
    Ok(norm_a.powf(lambda) * norm_b.powf(1.0 - lambda))
}

/// Exponents `(p, p₁)` reached by interpolating `(q, q₁)` and `(r, r₁)` with weight λ.
pub fn interpolation_exponents(q: (f64, f64), r: (f64, f64), lambda: f64) -> (f64, f64) {
    let inv = |a: f64| if a.is_infinite() { 0.0 } else { 1.0 / a };
    let p = 1.0 / (lambda * inv(q.0) + (1.0 - lambda) * inv(r.0));
    let p1 = 1.0 / (lambda * inv(q.1) + (1.0 - lambda) * inv(r.1));
    (p, p1)
}
