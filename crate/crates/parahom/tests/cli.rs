//! Exit codes and artifacts of the command-line surface.

use std::path::Path;
use std::process::Command;

fn parahom(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_parahom")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn validate_reports_cost_and_rejects_bad_lists() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", "{}");
    let (code, out, _) = parahom(&["validate", &ok]);
    assert_eq!(code, 0);
    assert!(out.contains("total_work"));
    let bad = write(dir.path(), "bad.json", r#"{"pipeline": {"epsilons": [0.0625, 0.125, 0.25]}}"#);
    let (code, _, err) = parahom(&["validate", &bad]);
    assert_eq!(code, 2);
    assert!(err.contains("pipeline.epsilons"), "{err}");
    let (code, _, _) = parahom(&["validate", "/nonexistent/config.json"]);
    assert_eq!(code, 2);
    let coarse = write(dir.path(), "coarse.json", r#"{"grids": {"ny": 16}}"#);
    let (code, _, err) = parahom(&["validate", &coarse]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"), "{err}");
}

#[test]
fn cell_table_run_passes_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "heat.json",
        r#"{"operator": {"base": {"family": "heat"}}, "grids": {"ny": 8, "nx": 8},
            "pipeline": {"table": {"points": 5, "pmax": 1.0, "stretch": 0.0}}}"#,
    );
    let out = dir.path().join("out");
    let (code, stdout, err) = parahom(&["cell-table", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("PASS"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["config"]["pipeline"]["kind"], "cell_table");
}

#[test]
fn failed_acceptance_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Equal Pucci bounds make the operator linear, so γ₊ = γ₋ and the example fails.
    let cfg = write(
        dir.path(),
        "pucci.json",
        r#"{"operator": {"base": {"family": "pucci_minus", "lo": 1.0, "hi": 1.0}},
            "grids": {"ny": 16, "nx": 16}, "pipeline": {"kind": "pucci_example"}}"#,
    );
    let out = dir.path().join("out");
    let (code, stdout, _) = parahom(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL"));
    assert!(out.join("pucci.json").exists());
}

#[test]
fn solver_budget_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tiny.json",
        r#"{"grids": {"ny": 8, "nx": 16, "nt": 6, "n_fine": 32},
            "pipeline": {"epsilons": [0.25, 0.125, 0.0625], "c_window": 0.5, "budget": 10.0}}"#,
    );
    let (code, _, err) = parahom(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn report_renders_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "rates.csv",
        "eps,err_full,err_interior,target,slope_full,slope_interior\n0.125,1e-2,1e-3,1,2,2\n0.0625,2.5e-3,2.5e-4,1,2,2\n",
    );
    let dat = dir.path().join("plot.dat");
    let (code, _, _) = parahom(&["report", &csv, "--out", dat.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(dat).unwrap().lines().count(), 3);
}
