//! Smoke tests for the command-line interface.

use bardiff::score::emit;
use bardiff::synth::generate_base_score;
use std::fs;
use std::process::Command;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bardiff"))
}

#[test]
fn version_reports_rng_identity() {
    let out = bin().arg("--version").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ChaCha8Rng"), "got: {text}");
}

#[test]
fn census_prints_totals() {
    let dir = TempDir::new().unwrap();
    let score = generate_base_score("base", &[3, 4, 5]).unwrap();
    let path = dir.path().join("base.xml");
    fs::write(&path, emit(&score)).unwrap();

    let out = bin().arg("census").arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("total,12"), "got: {text}");
}

#[test]
fn diff_and_sample_subcommands_work() {
    let dir = TempDir::new().unwrap();
    let score = generate_base_score("base", &[5i64; 20]).unwrap();
    let left = dir.path().join("left.xml");
    let right = dir.path().join("right.xml");
    fs::write(&left, emit(&score)).unwrap();
    fs::write(&right, emit(&score)).unwrap();

    let out = bin().arg("diff").arg(&left).arg(&right).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("delta,,,0"));

    let out = bin()
        .args(["sample", "--algorithm", "randsel", "--seed", "5"])
        .arg(&left)
        .output()
        .unwrap();
    assert!(out.status.success());
    let sample: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("sample is JSON");
    assert_eq!(sample["measure_numbers"].as_array().unwrap().len(), 2);
    assert_eq!(sample["seed"], 5);
}

#[test]
fn synth_and_run_round_trip() {
    let dir = TempDir::new().unwrap();
    let synth_out = dir.path().join("synth");
    let plan = dir.path().join("plan.json");
    fs::write(
        &plan,
        format!(
            r#"{{
  "n_measures": 30,
  "density": 8,
  "plan": {{"mode": "Uniform", "total_differences": 40, "rng_seed": 9}},
  "output_dir": "{}"
}}"#,
            synth_out.display()
        ),
    )
    .unwrap();
    let out = bin().arg("synth").arg("--plan").arg(&plan).output().unwrap();
    assert!(
        out.status.success(),
        "synth failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(synth_out.join("base.xml").exists());
    assert!(synth_out.join("mutated.xml").exists());
    assert!(synth_out.join("ground_truth.json").exists());

    let config = dir.path().join("config.json");
    let results = dir.path().join("results");
    fs::write(
        &config,
        format!(
            r#"{{
  "edition_paths": ["{}", "{}"],
  "base_edition": "base",
  "repetitions": 100,
  "algorithms": ["randSel"],
  "master_seed": 1,
  "output_dir": "{}"
}}"#,
            synth_out.join("base.xml").display(),
            synth_out.join("mutated.xml").display(),
            results.display()
        ),
    )
    .unwrap();
    let out = bin().arg("run").arg("--config").arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(results.join("summary.csv").exists());
    assert!(results.join("pairs_randSel.csv").exists());
    assert!(results.join("failures.log").exists());
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, "{ not json").unwrap();
    let out = bin().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_nonzero() {
    let out = bin().arg("census").arg("/nonexistent.xml").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
