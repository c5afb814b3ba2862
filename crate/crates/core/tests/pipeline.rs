//! End-to-end tests of the experiment runner on synthetic corpora.

use bardiff::experiment::{compare_full, run_experiment, DiffSource, ExperimentConfig};
use bardiff::ratio::Ratio;
use bardiff::sampler::Algorithm;
use bardiff::score::{emit, Score};
use bardiff::synth::{generate_base_score, plant_differences, DifferencePlan, PlantMode};
use std::fs;
use std::path::{Path, PathBuf};
use tempfile::TempDir;

fn write_edition(dir: &Path, name: &str, score: &Score) -> PathBuf {
    let path = dir.join(format!("{name}.xml"));
    fs::write(&path, emit(score)).unwrap();
    path
}

fn base_config(edition_paths: Vec<PathBuf>, output_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        edition_paths,
        base_edition: "base".to_string(),
        repetitions: 200,
        fraction: Ratio::new(1, 10),
        tolerance: Ratio::new(5, 100),
        algorithms: vec![Algorithm::RandSel],
        master_seed: 7,
        output_dir,
        diff_source: DiffSource::Native,
        workers: Some(2),
        whitelist_path: None,
        piece_id: None,
    }
}

/// Three synthetic editions derived from one base score.
fn synthetic_trio(dir: &Path) -> Vec<PathBuf> {
    let profile: Vec<i64> = (0..40).map(|i| 8 + i % 5).collect();
    let base = generate_base_score("base", &profile).unwrap();
    let (ed_b, _) = plant_differences(
        &base,
        &DifferencePlan {
            mode: PlantMode::Uniform,
            total_differences: 60,
            propagation_span: 1,
            rng_seed: 11,
        },
    )
    .unwrap();
    let (ed_c, _) = plant_differences(
        &base,
        &DifferencePlan {
            mode: PlantMode::DensityCorrelated,
            total_differences: 40,
            propagation_span: 1,
            rng_seed: 12,
        },
    )
    .unwrap();
    vec![
        write_edition(dir, "base", &base),
        write_edition(dir, "edb", &ed_b),
        write_edition(dir, "edc", &ed_c),
    ]
}

#[test]
fn comparison_accounting_is_exact() {
    let dir = TempDir::new().unwrap();
    let paths = synthetic_trio(dir.path());
    let mut config = base_config(paths, dir.path().join("out"));
    config.algorithms = vec![Algorithm::RandSel, Algorithm::OnlyEl];
    let report = run_experiment(&config).unwrap();
    let attempted = (config.repetitions * 3 * config.algorithms.len()) as u64;
    assert_eq!(
        report.n_comparisons_emitted + report.failures.len() as u64,
        attempted
    );
    let log = fs::read_to_string(dir.path().join("out/failures.log")).unwrap();
    assert_eq!(log.lines().count(), report.failures.len());
}

#[test]
fn identical_editions_have_zero_stats() {
    let dir = TempDir::new().unwrap();
    let profile = vec![10i64; 30];
    let base = generate_base_score("base", &profile).unwrap();
    let mut twin = base.clone();
    twin.edition_id = "twin".to_string();
    let paths = vec![
        write_edition(dir.path(), "base", &base),
        write_edition(dir.path(), "twin", &twin),
    ];
    let config = base_config(paths, dir.path().join("out"));
    let report = run_experiment(&config).unwrap();
    let summary = &report.summaries[0];
    assert_eq!(summary.delta_metric, 0.0);
    assert_eq!(summary.mean_sigma, 0.0);
    let stats = &summary.pair_stats[0];
    assert_eq!(stats.mu, 0.0);
    assert_eq!(stats.empirical_mean, 0.0);
}

#[test]
fn extra_measure_pair_is_flagged_and_run_succeeds() {
    // One edition carries an extra final measure: its pairs fail, the
    // remaining pair aggregates, and the run still succeeds.
    let dir = TempDir::new().unwrap();
    let profile: Vec<i64> = vec![6; 20];
    let base = generate_base_score("base", &profile).unwrap();
    let (ed_b, _) = plant_differences(
        &base,
        &DifferencePlan {
            mode: PlantMode::Uniform,
            total_differences: 20,
            propagation_span: 1,
            rng_seed: 3,
        },
    )
    .unwrap();
    let mut longer = vec![6i64; 21];
    longer[20] = 4;
    let ed_c = generate_base_score("edc", &longer).unwrap();

    let paths = vec![
        write_edition(dir.path(), "base", &base),
        write_edition(dir.path(), "edb", &ed_b),
        write_edition(dir.path(), "edc", &ed_c),
    ];
    let config = base_config(paths, dir.path().join("out"));
    let report = run_experiment(&config).unwrap();

    let log = fs::read_to_string(dir.path().join("out/failures.log")).unwrap();
    assert!(log.contains("edc"), "failed pair missing from failures.log");
    assert!(log.contains("pair alignment failed"));

    let pairs_csv = fs::read_to_string(dir.path().join("out/pairs_randSel.csv")).unwrap();
    let failed_rows = pairs_csv.lines().filter(|l| l.ends_with(",failed")).count();
    assert_eq!(failed_rows, 2); // base|edc and edb|edc
    let ok_rows = pairs_csv.lines().filter(|l| l.ends_with(",ok")).count();
    assert_eq!(ok_rows, 1);
    // the surviving pair aggregated all repetitions
    let summary = &report.summaries[0];
    assert_eq!(summary.pair_stats.len(), 1);
    assert_eq!(summary.pair_stats[0].n_samples, config.repetitions as u64);
}

#[test]
fn outputs_are_reproducible_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let paths = synthetic_trio(dir.path());

    let mut outputs = Vec::new();
    for (label, workers) in [("a", Some(1)), ("b", Some(1)), ("c", Some(8))] {
        let mut config = base_config(paths.clone(), dir.path().join(label));
        config.workers = workers;
        config.algorithms = vec![Algorithm::RandSel, Algorithm::BarElCount, Algorithm::OnlyEl];
        run_experiment(&config).unwrap();
        let mut blob = fs::read(dir.path().join(label).join("summary.csv")).unwrap();
        for alg in ["randSel", "barElCount", "onlyEl"] {
            blob.extend(fs::read(dir.path().join(label).join(format!("pairs_{alg}.csv"))).unwrap());
            blob.extend(
                fs::read(dir.path().join(label).join(format!("samples_{alg}.jsonl"))).unwrap(),
            );
        }
        outputs.push(blob);
    }
    assert_eq!(outputs[0], outputs[1], "same-config runs differ");
    assert_eq!(outputs[0], outputs[2], "worker count changed the outputs");
}

#[test]
fn compare_full_produces_all_pairs() {
    let profile = vec![5i64; 10];
    let base = generate_base_score("a", &profile).unwrap();
    let mut b = base.clone();
    b.edition_id = "b".into();
    let mut c = base.clone();
    c.edition_id = "c".into();
    let outcomes = compare_full(
        &[base, b, c],
        &bardiff::diff::DiffConfig::default(),
    );
    assert_eq!(outcomes.len(), 3); // C(3,2)
    assert!(outcomes.iter().all(|o| o.report.is_some()));
    assert!(outcomes.iter().all(|o| o.left != o.right));
}

#[test]
fn musicdiff_logs_replace_native_full_diffs() {
    let dir = TempDir::new().unwrap();
    let profile = vec![5i64; 10];
    let base = generate_base_score("base", &profile).unwrap();
    let mut other = base.clone();
    other.edition_id = "other".to_string();
    let paths = vec![
        write_edition(dir.path(), "base", &base),
        write_edition(dir.path(), "other", &other),
    ];

    let logs = dir.path().join("logs");
    fs::create_dir_all(&logs).unwrap();
    // 4 operations in measure 1, 2 in measure 6
    fs::write(
        logs.join("base__other.txt"),
        "@@ measure 1, staff 1, beat 1@@\n@@ measure 1, staff 1, beat 2@@\n\
         @@ measure 1, staff 2, beat 1@@\n@@ measure 1, staff 2, beat 3@@\n\
         @@ measure 6, staff 1, beat 1@@\n@@ measure 6, staff 1, beat 2.5@@\n",
    )
    .unwrap();

    let mut config = base_config(paths, dir.path().join("out"));
    config.diff_source = DiffSource::MusicdiffLogs { dir: logs };
    config.fraction = Ratio::new(1, 2); // 5 of 10 measures per sample
    let report = run_experiment(&config).unwrap();
    let stats = &report.summaries[0].pair_stats[0];
    assert_eq!(stats.mu, 3.0); // 0.5 * 6
    assert!(stats.empirical_mean > 0.0);
}
