use super::*;
use crate::error::Error;

fn cfg(json: &str) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_json(json)
}

fn path_of(e: Error) -> String {
    match e {
        Error::Config { path, .. } => path,
        e => panic!("expected a config error, got {e}"),
    }
}

#[test]
fn empty_document_materializes_defaults() {
    let c = cfg("{}").unwrap();
    assert_eq!(c, ExperimentConfig { pipeline: PipelineConfig { d_max: Some(1), ..Default::default() }, ..Default::default() });
    let echo = c.to_json().unwrap();
    assert!(echo.contains("\"d_max\": 1"));
    assert_eq!(cfg(&echo).unwrap(), c);
}

#[test]
fn increasing_eps_names_the_field() {
    let e = cfg(r#"{"pipeline": {"epsilons": [0.0625, 0.125, 0.25]}}"#).unwrap_err();
    assert_eq!(path_of(e), "pipeline.epsilons");
    let e = cfg(r#"{"pipeline": {"epsilons": [0.3, 0.2, 0.1]}}"#).unwrap_err();
    assert_eq!(path_of(e), "pipeline.epsilons");
}

#[test]
fn schema_errors_carry_paths() {
    let e = cfg(r#"{"grids": {"ny": "many"}}"#).unwrap_err();
    assert_eq!(path_of(e), "grids.ny");
    let e = cfg(r#"{"pipeline": {"kind": "everything"}}"#).unwrap_err();
    assert_eq!(path_of(e), "pipeline.kind");
    let e = cfg(r#"{"grids": {"nyy": 8}}"#).unwrap_err();
    assert_eq!(path_of(e), "grids.nyy");
    assert_eq!(cfg("[1,").unwrap_err().exit_code(), 2);
}

#[test]
fn inverted_ellipticity_bounds_are_rejected() {
    let e = cfg(r#"{"operator": {"base": {"family": "pucci_minus", "lo": 2.0, "hi": 1.0}}}"#).unwrap_err();
    assert_eq!(path_of(e), "operator.base");
}

#[test]
fn recession_pipeline_needs_partner() {
    let e = cfg(r#"{"pipeline": {"kind": "recession_rate"}}"#).unwrap_err();
    assert_eq!(path_of(e), "operator.recession");
    let ok = cfg(
        r#"{"operator": {"base": {"family": "harmonic_1d"}, "recession": {"delta": 0.75, "b": {"const": 0.3}}},
            "pipeline": {"kind": "recession_rate"}}"#,
    )
    .unwrap();
    assert!(ok.build_operator().unwrap().recession.is_some());
}

#[test]
fn validate_estimates_cost_and_warns_on_coarse_lattice() {
    let c = cfg("{}").unwrap();
    let r = validate(&c).unwrap();
    assert_eq!(r.cost.len(), 3);
    assert!(r.warnings.is_empty());
    assert!(r.cost.windows(2).all(|w| w[1].work > w[0].work));
    assert_eq!(r.cost[0].fine_nodes, 8 * 64);
    let c = cfg(r#"{"grids": {"ny": 16}}"#).unwrap();
    let r = validate(&c).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("below 32")));
}

fn small_table_config() -> ExperimentConfig {
    cfg(r#"{"operator": {"base": {"family": "heat"}},
            "grids": {"ny": 8, "nx": 8},
            "pipeline": {"kind": "cell_table", "table": {"points": 5, "pmax": 1.0, "stretch": 0.0, "concavity_triples": 50}}}"#)
    .unwrap()
}

#[test]
fn cell_table_run_writes_checksummed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&small_table_config(), dir.path()).unwrap();
    assert!(m.pass, "{:?}", m.summary);
    for a in &m.artifacts {
        let body = std::fs::read(dir.path().join(&a.path)).unwrap();
        assert_eq!(sha256_hex(&body), a.sha256);
    }
    assert!(m.artifacts.iter().any(|a| a.path == "table.json"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run(&small_table_config(), a.path()).unwrap();
    let mb = run(&small_table_config(), b.path()).unwrap();
    assert_eq!(ma.artifacts, mb.artifacts);
    assert_eq!(ma.pass, mb.pass);
}

#[test]
fn report_rerenders_csv() {
    let csv = "eps,err_full,err_interior,target,slope_full,slope_interior\n0.5,1,0.25,1,1,1\n0.25,0.5,0.0625,1,1,1\n";
    let s = render_report(csv).unwrap();
    assert_eq!(s.lines().count(), 3);
    assert!(render_report("h\n0.5,x\n").is_err());
}
