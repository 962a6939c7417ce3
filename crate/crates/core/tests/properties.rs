mod common;

use proptest::prelude::*;

use nrc_core::harness::{run_case, CaseConfig, Mode};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn truncation_is_idempotent_monotone_and_nonexpansive(m in 1u32..200, s in -1e3f64..1e3, t in -1e3f64..1e3) {
        truncation_triple(m, s, t)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn boundary_laws_grow_and_are_monotone((c, ell, mult, xi, eta) in any_law_arguments()) {
        law_growth(c, ell, mult, xi, eta)?;
    }

    #[test]
    fn truncation_at_integer_points(m in 1u32..50, k in -100i32..100) {
        truncation_triple(m, k as f64, (k + 1) as f64)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn norms_are_homogeneous(seed in any::<u64>(), c in -5.0f64..5.0, p in 1.0f64..6.0, q in 1.0f64..6.0) {
        norm_homogeneity(&small_mesh(), seed, c, p, q)?;
    }

    #[test]
    fn interpolation_bounds_intermediate_norms(seed in any::<u64>(), lambda in 0.01f64..0.99) {
        interpolation_random(&small_mesh(), seed, lambda)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn operations_refuse_foreign_regimes(mask in 0u8..64) {
        regime_gating(mask)?;
    }
}

#[test]
fn every_regime_subset_is_gated() {
    for mask in 0..64u8 {
        regime_gating(mask).unwrap();
    }
}

fn canned(name: &str) -> CaseConfig {
    CaseConfig::load(std::path::Path::new(&format!("{}/configs/{name}.json", env!("CARGO_MANIFEST_DIR")))).unwrap()
}

#[test]
fn interpolation_holds_on_solved_fields() {
    for name in ["robin", "drift", "blackbody"] {
        let out = run_case(&canned(name), Mode::Solve);
        for lambda in [0.1, 0.25, 0.5, 0.75, 0.9] {
            interpolation_on(out.mesh.as_ref().unwrap(), out.solution.as_ref().unwrap(), lambda).unwrap();
        }
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    for name in ["robin", "l1_source"] {
        let cfg = canned(name);
        let a = serde_json::to_string_pretty(&run_case(&cfg, Mode::Verify).report).unwrap();
        let b = serde_json::to_string_pretty(&run_case(&cfg, Mode::Verify).report).unwrap();
        let mut seq = cfg.clone();
        seq.exec = nrc_core::exec::Exec::Sequential;
        let c = serde_json::to_string_pretty(&run_case(&seq, Mode::Verify).report).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(a, c, "{name} sequential");
    }
}
