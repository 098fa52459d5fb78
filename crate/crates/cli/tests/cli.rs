use std::path::Path;
use std::process::{Command, Output};

fn topoarray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topoarray"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "chern"}"#);
    let o = topoarray(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("OK: chern"));
    assert!(text.contains("\"grid_n\": 24"));
    assert!(text.contains("\"mu_b\": 12.0"));
}

#[test]
fn negative_spacing_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "bands", "params": {"spacing": -0.05}}"#,
    );
    let o = topoarray(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.spacing"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_lists_the_choices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "phonons"}"#);
    let o = topoarray(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for name in [
        "bands",
        "chern",
        "gapscan",
        "spacing-scan",
        "stripe",
        "evolve",
        "bound",
        "lifetimes",
        "fluct",
    ] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "chern", "options": {"grid": 24}}"#,
    );
    assert_eq!(
        topoarray(&["validate", "--config", &cfg]).status.code(),
        Some(2)
    );
    let cfg = write_config(dir.path(), r#"{"experiment": "chern", "colour": "red"}"#);
    assert_eq!(
        topoarray(&["validate", "--config", &cfg]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_config_leaves_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "bands", "params": {"#);
    let out = dir.path().join("out");
    let o = topoarray(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn closed_gap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "chern", "params": {"mu_b": 0.0}, "options": {"grid_n": 12}}"#,
    );
    let out = dir.path().join("out");
    let o = topoarray(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn chern_run_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "chern", "options": {"grid_n": 12}}"#,
    );
    let out = dir.path().join("out");
    let o = topoarray(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("chern.json")).unwrap()).unwrap();
    assert_eq!(report["sum_above"], 1);
    assert_eq!(report["sum_below"], -1);
    let flux = std::fs::read_to_string(out.join("chern_flux.csv")).unwrap();
    assert!(flux.starts_with("i,j,flux_band1"));
    assert_eq!(flux.lines().count(), 1 + 144);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "chern");
    assert_eq!(manifest["config"]["options"]["grid_n"], 12);
    assert!(manifest["wall_time_s"].as_f64().is_some());
    assert!(manifest["version"].is_string());

    // The echoed config runs again and reproduces the CSV byte for byte.
    let again = dir.path().join("again.json");
    std::fs::write(&again, manifest["config"].to_string()).unwrap();
    let out2 = dir.path().join("out2");
    let o = topoarray(&[
        "run",
        "--config",
        again.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        flux,
        std::fs::read_to_string(out2.join("chern_flux.csv")).unwrap()
    );
}

#[test]
fn bands_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "bands", "options": {"n_per_segment": 10, "grid_n": 12}}"#,
    );
    let out = dir.path().join("out");
    let o = topoarray(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("bands.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("k_index,kx,ky,arc_len,band,re_e,gamma,in_light_cone")
    );
    assert_eq!(lines.count(), 4 * 31);
    assert!(!csv.contains('\r'));
}

#[test]
fn fluct_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "fluct", "options": {"deltas": [0.0, 0.25], "samples": 500, "grid_n": 12, "batches": 2}}"#,
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = topoarray(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(out.join("fluct.csv")).unwrap()
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    assert_ne!(a, run("c", "6"));
    assert!(a.starts_with("delta_over_a,delta,stderr\n"));
}

#[test]
fn evolve_rejects_physical_params_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "evolve", "params": {"mu_b": 12.0}}"#,
    );
    let o = topoarray(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_evolve_run_writes_frames_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "evolve", "options": {"rings": 4, "t_end": 0.5, "stride": 50, "notch": null}}"#,
    );
    let out = dir.path().join("out");
    let o = topoarray(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["n_clean"], 120);
    assert!(metrics["forward_fraction"].is_number());
    let frame = std::fs::read_to_string(out.join("frames/clean_0000.csv")).unwrap();
    assert!(frame.starts_with("index,x,y,p\n"));
    assert_eq!(frame.lines().count(), 121);
    assert!(out.join("frames/clean_0002.csv").exists());
}

#[test]
fn bands_path_skips_points_on_the_light_circle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "bands", "options": {"n_per_segment": 20, "grid_n": 12}}"#,
    );
    let out = dir.path().join("out");
    let o = topoarray(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["results"]["skipped_on_light_circle"],
        serde_json::json!([17])
    );
    assert_eq!(manifest["results"]["points"], 60);
}
