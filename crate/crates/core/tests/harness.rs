use std::path::{Path, PathBuf};
use std::process::Command;

use nrc_core::bounds::{Applicability, ENERGY_B0, ENERGY_L2, MAX_PRINCIPLE};
use nrc_core::harness::{run_case, run_sweep, Axis, CaseConfig, Mode, Verdict};
use nrc_core::problem::Regime;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn canned(name: &str) -> CaseConfig {
    CaseConfig::load(&config_path(name)).unwrap()
}

fn nrc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nrc")).args(args).output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

#[test]
fn constant_neumann_case_satisfies_every_row() {
    let r = run_case(&canned("neumann_const"), Mode::Verify).report;
    assert_eq!(r.exit_code(), 0);
    assert!(r.rows.iter().any(|x| x.verdict == Verdict::Satisfied));
    for row in &r.rows {
        assert!(matches!(row.verdict, Verdict::Satisfied | Verdict::Inapplicable), "{row:?}");
        if let (Verdict::Satisfied, Some(x)) = (row.verdict, row.ratio) {
            assert!(x <= 1.0 + 1e-12, "{row:?}");
        }
    }
}

#[test]
fn robin_energy_rows_hold() {
    let r = run_case(&canned("robin"), Mode::Verify).report;
    for id in ["energy_l2.sup_l2", "energy_l2.energy"] {
        let row = r.row(id).unwrap();
        assert_eq!(row.verdict, Verdict::Satisfied, "{row:?}");
        assert!(row.ratio.unwrap() <= 1.0);
    }
    assert!(r.diagnostics.unwrap().energy.unwrap().slack > -1e-8);
}

#[test]
fn maximum_principle_rows_report_the_divergent_series() {
    let cfg = canned("max_principle_3d")
        .with_override("problem.drift.field.space", r#"{"kind":"vortex"}"#)
        .unwrap()
        .with_override("problem.drift.field.scale", "3")
        .unwrap();
    let r = run_case(&cfg, Mode::Bounds).report;
    assert!(r.regimes.contains(&Regime::MaxPrinciple));
    let e = r.bounds.as_ref().unwrap().entry(MAX_PRINCIPLE).unwrap();
    assert_eq!(e.applicability, Applicability::Inapplicable);
    assert!(e.reason.as_deref().unwrap().contains("divergent series"), "{e:?}");
    assert!(e.get("M").unwrap().is_finite());
    assert_eq!(r.row("max_principle.sup").unwrap().verdict, Verdict::Inapplicable);

    // without drift the smallness condition already fails
    let r = run_case(&canned("max_principle_3d"), Mode::Bounds).report;
    let e = r.bounds.as_ref().unwrap().entry(MAX_PRINCIPLE).unwrap();
    assert!(e.reason.as_deref().unwrap().contains("smallness"), "{e:?}");
}

#[test]
fn zero_b_lower_with_radiation_is_outside_the_b0_bound() {
    let r = run_case(&canned("b0_blackbody"), Mode::Bounds).report;
    assert_eq!(r.exit_code(), 0);
    let e = r.bounds.as_ref().unwrap().entry(ENERGY_B0).unwrap();
    assert_eq!(e.applicability, Applicability::Inapplicable);
    assert!(e.reason.as_deref().unwrap().contains("ℓ > 3"), "{e:?}");
}

#[test]
fn two_by_two_sweep_has_four_rows() {
    let axes = [Axis::parse("b=0.5,2").unwrap(), Axis::parse("u0_scale=0.5,1").unwrap()];
    let res = run_sweep(&canned("robin"), &axes, Mode::Bounds);
    assert_eq!(res.summary.len(), 4);
    assert_eq!(res.exit_code(), 0);
    let csv = res.summary_csv(&["b".into(), "u0_scale".into()]);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("robin_b=0.5_u0_scale=0.5,0.5,0.5,0"));
}

#[test]
fn drift_scale_sweep_increases_the_gronwall_exponent() {
    let axes = [Axis::parse("escale=0,0.1,0.5,1,2").unwrap()];
    let res = run_sweep(&canned("drift"), &axes, Mode::Bounds);
    let q: Vec<f64> = res.summary.iter().map(|r| r.q.unwrap()).collect();
    assert_eq!(q[0], 0.0);
    assert!(q.windows(2).all(|w| w[1] > w[0]), "{q:?}");
    // past overflow the entry is inapplicable but still reports Q
    let last = res.cases.last().unwrap().report.as_ref().unwrap();
    assert_eq!(last.bounds.as_ref().unwrap().entry(ENERGY_L2).unwrap().applicability, Applicability::Inapplicable);
}

#[test]
fn boundary_coefficient_sweep_decreases_b0() {
    let axes = [Axis::parse("b=0.25,0.5,1,2,4").unwrap()];
    let res = run_sweep(&canned("drift"), &axes, Mode::Bounds);
    let b0: Vec<f64> = res.summary.iter().map(|r| r.b0.unwrap()).collect();
    assert!(b0.windows(2).all(|w| w[1] < w[0]), "{b0:?}");
}

#[test]
fn zero_b_lower_routes_robin_to_the_b0_rows() {
    let res = run_sweep(&canned("robin"), &[Axis::parse("bsharp=0").unwrap()], Mode::Bounds);
    let r = res.cases[0].report.as_ref().unwrap();
    assert!(r.regimes.contains(&Regime::B0L2), "{:?}", r.regimes);
    assert_eq!(r.row("energy_b0.sup_l2").unwrap().verdict, Verdict::Unmeasured);
    assert_eq!(r.row("energy_l2.sup_l2").unwrap().verdict, Verdict::Inapplicable);
}

#[test]
fn sweep_keeps_going_past_failed_cases() {
    let res = run_sweep(&canned("robin"), &[Axis::parse("dt=0.01,0.3").unwrap()], Mode::Solve);
    assert_eq!(res.summary[0].exit_code, 0);
    assert_eq!(res.summary[1].exit_code, 2);
    assert!(res.cases[1].error.is_some());
    assert_eq!(res.exit_code(), 2);
}

#[test]
fn cli_exit_codes() {
    let p = |n: &str| config_path(n).to_string_lossy().into_owned();
    assert_eq!(nrc(&["validate", &p("robin")]).0, 0);
    assert_eq!(nrc(&["verify", &p("neumann_const")]).0, 0);
    let (code, text) = nrc(&["bounds", &p("b0_blackbody")]);
    assert_eq!(code, 0);
    assert!(text.contains("ℓ > 3"), "{text}");
    // the sup-in-time L¹ row is violated on this case
    let (code, text) = nrc(&["verify", &p("l1_source")]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("violated"));
    assert_eq!(nrc(&["verify", "/nonexistent/config.json"]).0, 2);
    assert_eq!(nrc(&["verify", "--bogus", &p("robin")]).0, 2);
    assert_eq!(nrc(&["sweep", &p("robin")]).0, 2);
}

#[test]
fn cli_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| config_path(n).to_string_lossy().into_owned();
    let out = dir.path().join("robin");
    let (code, _) = nrc(&["solve", &p("robin"), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["case"], "robin");
    assert!(out.join("metadata.json").exists());
    let diag = std::fs::read_to_string(out.join("diagnostics.jsonl")).unwrap();
    assert_eq!(diag.lines().count(), 50);

    let csv_dir = dir.path().join("csv");
    let (code, _) = nrc(&["verify", &p("neumann_const"), "--out", csv_dir.to_str().unwrap(), "--format", "csv", "--quiet"]);
    assert_eq!(code, 0);
    let rows = std::fs::read_to_string(csv_dir.join("rows.csv")).unwrap();
    assert!(rows.starts_with("id,source,quantity"));

    let sweep_dir = dir.path().join("sweep");
    let (code, _) = nrc(&[
        "sweep",
        &p("robin"),
        "--axis",
        "b=0.5,1",
        "--axis",
        "T=0.2,0.5",
        "--mode",
        "bounds",
        "--out",
        sweep_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code, 0);
    let summary = std::fs::read_to_string(sweep_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(std::fs::read_dir(sweep_dir.join("cases")).unwrap().count(), 4);
}
