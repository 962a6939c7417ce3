//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nrc_core::bounds::{self, BoundInputs};
use nrc_core::domain::{build_box_mesh_divisions, DomainSpec, GammaSelector, Mesh};
use nrc_core::exec::Exec;
use nrc_core::error::Error;
use nrc_core::harness::CaseConfig;
use nrc_core::problem::{
    truncate, BoundaryLaw, BoundaryLawConfig, DataNorms, DiffusionField, DriftField, LawKind, ProblemData, ProblemSpec, Regime,
    VectorField,
};
use nrc_core::sobolev::{ConstantKind, SobolevRegistry};
use nrc_core::solver::{l2_error, solve, DiscreteSolution, NormEvaluator, SolverOptions, StepInfo};

// ---------------------------------------------------------------------------
// Unit-constant fixtures
// ---------------------------------------------------------------------------

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

/// Every constant the formulas look up, set to one.
pub fn unit_registry() -> SobolevRegistry {
    let mut reg = SobolevRegistry {
        fingerprint: "unit".into(),
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

// ---------------------------------------------------------------------------
// Random cases
// ---------------------------------------------------------------------------

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

fn gamma(rng: &mut ChaCha8Rng) -> Value {
    pick(
        rng,
        &[json!("all"), json!(["left", "right"]), json!(["bottom"]), json!(["left", "top"])],
    )
    .clone()
}

fn diffusion(rng: &mut ChaCha8Rng, checkerboard: bool) -> Value {
    if checkerboard {
        let b = *pick(rng, &[0.25, 0.5]);
        json!({ "kind": "checkerboard", "low": rng.gen_range(0.3..1.0), "high": rng.gen_range(1.5..3.0), "block": [b, b] })
    } else {
        json!({ "kind": "isotropic", "value": rng.gen_range(0.5..2.0) })
    }
}

/// Nonnegative initial value.
fn initial(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..3) {
        0 => json!({ "space": { "kind": "constant" }, "scale": rng.gen_range(0.2..1.5) }),
        1 => {
            let mean = rng.gen_range(0.5..1.5);
            json!({ "space": { "kind": "cosine", "mean": mean, "amplitude": mean * rng.gen_range(0.0..1.0), "wavenumber": *pick(rng, &[1.0, 2.0]) } })
        }
        _ => json!({
            "space": { "kind": "gaussian", "center": [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)], "width": rng.gen_range(0.1..0.3) },
            "scale": rng.gen_range(0.5..2.0)
        }),
    }
}

/// Nonnegative boundary flux.
fn flux(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..3) {
        0 => json!({ "space": { "kind": "zero" } }),
        1 => json!({ "space": { "kind": "constant" }, "scale": rng.gen_range(0.0..0.5) }),
        _ => json!({
            "space": { "kind": "gaussian", "center": [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)], "width": 0.3 },
            "scale": rng.gen_range(0.0..1.0)
        }),
    }
}

fn drift(rng: &mut ChaCha8Rng, on: bool) -> Value {
    if !on {
        return json!({ "space": { "kind": "zero" } });
    }
    if rng.gen_bool(0.5) {
        json!({ "space": { "kind": "vortex" }, "scale": rng.gen_range(0.02..0.1) })
    } else {
        json!({ "space": { "kind": "constant", "value": [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)] } })
    }
}

fn law(rng: &mut ChaCha8Rng, radiative: bool) -> Value {
    if radiative {
        json!({ "kind": "blackbody", "sigma": rng.gen_range(0.2..1.0) })
    } else {
        json!({ "kind": "robin", "coefficient": rng.gen_range(0.5..2.0) })
    }
}

fn config(name: String, problem: Value, disc: Value, seed: u64) -> CaseConfig {
    let v = json!({ "name": name, "problem": problem, "discretization": disc, "seed": seed });
    CaseConfig::from_json(&v.to_string()).expect("generated config parses")
}

fn fine_grid() -> Value {
    json!({ "divisions": [32, 32], "dt": 0.01, "refine_on_violation": false })
}

/// Source-free Robin (even index) or blackbody (odd index) case on the unit
/// square, T = 0.5, with or without a small drift.
pub fn energy_case(index: u64, with_drift: bool) -> CaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index);
    let checker = rng.gen_bool(0.5);
    let problem = json!({
        "domain": { "extents": [1, 1], "gamma": gamma(&mut rng), "time_horizon": 0.5 },
        "diffusion": diffusion(&mut rng, checker),
        "drift": { "field": drift(&mut rng, with_drift), "q": 8, "r": 8 },
        "law": law(&mut rng, index % 2 == 1),
        "data": { "u0": initial(&mut rng), "h": flux(&mut rng) }
    });
    let tag = if with_drift { "drift" } else { "nodrift" };
    config(format!("energy_{tag}_{index}"), problem, fine_grid(), index)
}

/// Nonnegative data, drift on every other case, checkerboard diffusion on
/// every third.
pub fn min_case(index: u64) -> CaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(2000 + index);
    let with_drift = index % 2 == 1;
    let radiative = rng.gen_bool(0.5);
    let problem = json!({
        "domain": { "extents": [1, 1], "gamma": gamma(&mut rng), "time_horizon": 0.5 },
        "diffusion": diffusion(&mut rng, index % 3 == 0),
        "drift": { "field": drift(&mut rng, with_drift), "q": 8, "r": 8 },
        "law": law(&mut rng, radiative),
        "data": {
            "u0": initial(&mut rng),
            "h": flux(&mut rng),
            "f": { "space": { "kind": "gaussian", "center": [0.5, 0.5], "width": 0.2 }, "scale": rng.gen_range(0.0..2.0) }
        }
    });
    config(format!("min_{index}"), problem, json!({ "divisions": [24, 24], "dt": 0.01, "refine_on_violation": false }), index)
}

/// Source term in the L¹ exponent regime (q = 4, r = 3, p = 7/6).
pub fn l1_case(index: u64) -> CaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(3000 + index);
    let time = match rng.gen_range(0..3) {
        0 => json!({ "kind": "constant" }),
        1 => json!({ "kind": "affine", "a": 1.0, "b": rng.gen_range(-1.5..1.5) }),
        _ => json!({ "kind": "exp", "rate": rng.gen_range(-3.0..1.0) }),
    };
    let f = json!({
        "space": { "kind": "gaussian", "center": [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)], "width": rng.gen_range(0.1..0.3) },
        "time": time,
        "scale": rng.gen_range(0.5..8.0)
    });
    let checker = rng.gen_bool(0.5);
    let problem = json!({
        "domain": { "extents": [1, 1], "gamma": gamma(&mut rng), "time_horizon": 0.5 },
        "diffusion": diffusion(&mut rng, checker),
        "drift": { "field": drift(&mut rng, index % 2 == 1), "q": 4, "r": 3 },
        "law": { "kind": "robin", "coefficient": rng.gen_range(0.5..2.0) },
        "data": { "u0": initial(&mut rng), "h": flux(&mut rng), "f": f },
        "p": 7.0 / 6.0
    });
    config(
        format!("l1_{index}"),
        problem,
        json!({ "divisions": [32, 32], "dt": 0.01, "truncation": 50, "refine_on_violation": false }),
        index,
    )
}

/// Drift-free Robin problem on the unit cube with Γ = ∂Ω.
pub fn cube_case(index: u64) -> CaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(4000 + index);
    let u0 = if index % 2 == 0 {
        json!({ "space": { "kind": "cosine", "mean": 1.0, "amplitude": rng.gen_range(0.0..0.9), "wavenumber": 1.0 }, "scale": rng.gen_range(0.5..3.0) })
    } else {
        json!({
            "space": { "kind": "gaussian", "center": [0.5, 0.5, 0.5], "width": rng.gen_range(0.15..0.4) },
            "scale": rng.gen_range(0.5..3.0)
        })
    };
    let problem = json!({
        "domain": { "extents": [1, 1, 1], "gamma": "all", "time_horizon": 0.25 },
        "diffusion": { "kind": "isotropic", "value": rng.gen_range(0.5..2.0) },
        "drift": { "field": { "space": { "kind": "zero" } }, "q": 12, "r": 12 },
        "law": { "kind": "robin", "coefficient": rng.gen_range(0.5..2.0) },
        "data": { "u0": u0, "h": { "space": { "kind": "constant" }, "scale": rng.gen_range(0.0..1.0) } }
    });
    config(format!("cube_{index}"), problem, json!({ "divisions": [8, 8, 8], "dt": 0.025, "refine_on_violation": false }), index)
}

// ---------------------------------------------------------------------------
// Manufactured solution
// ---------------------------------------------------------------------------

/// L²(Q_T) errors against `e^{-t} cos πx cos πy` for each `(divisions, dt)`.
pub fn manufactured_errors(levels: &[(usize, f64)], robin: f64) -> Vec<f64> {
    let spec = ProblemSpec {
        domain: DomainSpec::unit_square(GammaSelector::faces(&["left", "right"]), 0.5),
        diffusion: DiffusionField::identity(2),
        drift: DriftField {
            field: VectorField::zero(),
            q: 8.0,
            r: 8.0,
            theta: None,
        },
        law: BoundaryLaw::robin(robin),
        data: ProblemData::manufactured(2, 1.0, robin),
        p: 1.2,
        two_star: 4.0,
    };
    levels
        .iter()
        .map(|&(k, dt)| {
            let mesh = build_box_mesh_divisions(&spec.domain, &[k, k]).unwrap();
            let sol = solve(&spec, &mesh, &SolverOptions { dt, ..Default::default() }).unwrap();
            l2_error(&sol, &mesh, ProblemData::manufactured_exact, 4)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn truncation_triple(m: u32, s: f64, t: f64) -> Result<(), TestCaseError> {
    let (ts, tt) = (truncate(m, s), truncate(m, t));
    prop_assert_eq!(truncate(m, ts), ts, "idempotence");
    prop_assert!(ts.abs() <= m as f64);
    if s <= t {
        prop_assert!(ts <= tt, "monotonicity");
    }
    prop_assert!((ts - tt).abs() <= (s - t).abs(), "nonexpansiveness");
    Ok(())
}

pub fn law_presets(c: f64, ell: f64) -> Vec<BoundaryLaw> {
    vec![
        BoundaryLaw::neumann(),
        BoundaryLaw::robin(c),
        BoundaryLaw::blackbody(c),
        BoundaryLaw::wien(c),
        BoundaryLaw::new(LawKind::Custom { coefficient: c, ell }),
    ]
}

/// `b_# |ξ|^{ℓ-2} ≤ b(ξ) ≤ b^# |ξ|^{ℓ-2}` and `ξ ↦ b(ξ) ξ` nondecreasing,
/// with and without face multipliers.
pub fn law_growth(c: f64, ell: f64, mult: f64, xi: f64, eta: f64) -> Result<(), TestCaseError> {
    for base in law_presets(c, ell) {
        let mut cfg: BoundaryLawConfig = base.to_config();
        cfg.b_lower = None;
        cfg.b_upper = None;
        cfg.face_multipliers.insert("left".into(), mult);
        let with_mult = BoundaryLaw::from_config(&cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for law in [&base, &with_mult] {
            for face in ["left", "right"] {
                let face = nrc_core::domain::BoxFace::parse(face).unwrap();
                let b = law.eval(face, xi);
                let g = xi.abs().powf(law.ell - 2.0);
                prop_assert!(b >= 0.0);
                prop_assert!(b >= law.b_lower * g * (1.0 - 1e-12), "{:?}: b = {b} < {}", law.kind, law.b_lower * g);
                prop_assert!(b <= law.b_upper * g * (1.0 + 1e-12), "{:?}: b = {b} > {}", law.kind, law.b_upper * g);
                let (lo, hi) = if xi <= eta { (xi, eta) } else { (eta, xi) };
                prop_assert!(law.eval(face, lo) * lo <= law.eval(face, hi) * hi * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
    Ok(())
}

pub fn small_mesh() -> Mesh {
    build_box_mesh_divisions(&DomainSpec::unit_square(GammaSelector::faces(&["left", "top"]), 1.0), &[6, 6]).unwrap()
}

fn random_states(seed: u64, nv: usize, steps: usize) -> DiscreteSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / steps as f64;
    DiscreteSolution {
        dt,
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        states: (0..=steps).map(|_| (0..nv).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
        steps: vec![
            StepInfo {
                iterations: 1,
                residual: 0.0
            };
            steps
        ],
    }
}

/// `‖c u‖ = |c| ‖u‖` for the spatial, boundary, gradient and mixed norms.
pub fn norm_homogeneity(mesh: &Mesh, seed: u64, c: f64, p: f64, q: f64) -> Result<(), TestCaseError> {
    let ev = NormEvaluator::new(mesh, 3);
    let sol = random_states(seed, mesh.n_vertices(), 4);
    let mut scaled = sol.clone();
    scaled.states.iter_mut().flatten().for_each(|v| *v *= c);
    let u = &sol.states[1];
    let cu = &scaled.states[1];
    let rel = 1e-12;
    prop_assert!(close(ev.space(cu, p), c.abs() * ev.space(u, p), rel));
    prop_assert!(close(ev.gamma(cu, p), c.abs() * ev.gamma(u, p), rel));
    prop_assert!(close(ev.grad_power(cu, p), c.abs().powf(p) * ev.grad_power(u, p), 1e-11));
    for qq in [q, f64::INFINITY] {
        prop_assert!(close(ev.mixed(&scaled, p, qq, Exec::Sequential), c.abs() * ev.mixed(&sol, p, qq, Exec::Sequential), rel));
        prop_assert!(close(
            ev.mixed_gamma(&scaled, p, qq, Exec::Sequential),
            c.abs() * ev.mixed_gamma(&sol, p, qq, Exec::Sequential),
            rel
        ));
    }
    Ok(())
}

/// Hölder interpolation between the (2, ∞) and (4, 2) mixed norms.
pub fn interpolation_on(mesh: &Mesh, sol: &DiscreteSolution, lambda: f64) -> Result<(), TestCaseError> {
    let ev = NormEvaluator::new(mesh, 3);
    let a = ev.mixed(sol, 2.0, f64::INFINITY, Exec::Sequential);
    let b = ev.mixed(sol, 4.0, 2.0, Exec::Sequential);
    let (p, q) = bounds::interpolation_exponents((2.0, f64::INFINITY), (4.0, 2.0), lambda);
    let mid = ev.mixed(sol, p, q, Exec::Sequential);
    let bound = bounds::interpolation_bound(a, b, lambda).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(mid <= bound * (1.0 + 1e-10), "‖u‖_({p},{q}) = {mid} > {bound}");
    Ok(())
}

pub fn interpolation_random(mesh: &Mesh, seed: u64, lambda: f64) -> Result<(), TestCaseError> {
    interpolation_on(mesh, &random_states(seed, mesh.n_vertices(), 5), lambda)
}

pub const ALL_REGIMES: [Regime; 6] = [
    Regime::L2Theory,
    Regime::MaxPrinciple,
    Regime::L1Theory,
    Regime::B0L2,
    Regime::B0L1,
    Regime::None,
];

fn is_gating_error(r: Result<(), Error>) -> bool {
    matches!(r, Err(Error::Precondition { .. })) && r.unwrap_err().to_string().contains("requires regime")
}

/// Each regime-bound operation refuses to run, with a precondition error,
/// when its regime is absent from the inputs.
pub fn regime_gating(mask: u8) -> Result<(), TestCaseError> {
    let regimes: Vec<Regime> = ALL_REGIMES.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, r)| *r).collect();
    let mut inp = unit_inputs(2, &regimes);
    inp.p = 1.2;
    inp.q = 10.0;
    inp.r = 2.0;
    let reg = unit_registry();
    let ops: [(Regime, Result<(), Error>); 5] = [
        (Regime::L2Theory, bounds::energy_bound(&inp, 0.0).map(|_| ())),
        (Regime::MaxPrinciple, bounds::moser_params(&inp, &reg).map(|_| ())),
        (Regime::L1Theory, bounds::l1_gradient_bound(&inp, &reg).map(|_| ())),
        (Regime::B0L2, bounds::b0_energy_bound(&inp, &reg, 0.0).map(|_| ())),
        (Regime::B0L1, bounds::b0_l1_gradient_bound(&inp, &reg).map(|_| ())),
    ];
    for (regime, res) in ops {
        let gated = is_gating_error(res);
        prop_assert_eq!(gated, !regimes.contains(&regime), "{} with regimes {:?}", regime, regimes);
    }
    Ok(())
}

pub fn any_law_arguments() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (0.05f64..5.0, 2.0f64..7.0, 0.1f64..3.0, -20.0f64..20.0, -20.0f64..20.0)
}
