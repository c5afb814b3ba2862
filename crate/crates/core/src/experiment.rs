//! End-to-end experiment runner: parse editions, draw K samples per
//! algorithm from the base edition's census, evaluate every edition pair on
//! every sample, aggregate, and write result tables.
//!
//! Sampled pair deltas are computed as the restriction of the full-score
//! per-measure diff to the sampled measures; this is exactly equivalent to
//! diffing the extracted subdocuments (restriction consistency) and avoids
//! re-aligning the same measures thousands of times.

use crate::diff::{diff_scores, parse_musicdiff_log, DiffConfig, DiffReport};
use crate::eval::{
    delta_metric, round2, theoretical_mean, Aggregate, EvaluationSummary, PairStats,
};
use crate::ratio::Ratio;
use crate::sampler::{derive_seed, draw, Algorithm, Sample, SamplingParams};
use crate::score::{
    measure_census, parse_score, validate_alignment, AlignmentReport, Score, ScoreError, Whitelist,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum DiffSource {
    /// Measure-local unit-cost diff built into this toolkit.
    Native,
    /// Full-score comparisons read from musicdiff text logs named
    /// `<left>__<right>.txt` in the given directory.
    MusicdiffLogs { dir: PathBuf },
}

impl Default for DiffSource {
    fn default() -> Self {
        DiffSource::Native
    }
}

fn default_repetitions() -> usize {
    10_000
}

fn default_fraction() -> Ratio {
    Ratio::new(1, 10)
}

fn default_tolerance() -> Ratio {
    Ratio::new(5, 100)
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct ExperimentConfig {
    pub edition_paths: Vec<PathBuf>,
    /// Edition id (file stem) whose census drives the sampling.
    pub base_edition: String,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_fraction")]
    pub fraction: Ratio,
    #[serde(default = "default_tolerance")]
    pub tolerance: Ratio,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub diff_source: DiffSource,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub whitelist_path: Option<PathBuf>,
    #[serde(default)]
    pub piece_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to parse {path}: {source}")]
    Score {
        path: String,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub algorithm: Algorithm,
    pub sample_index: usize,
    pub left: String,
    pub right: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct PairOutcome {
    pub left: String,
    pub right: String,
    pub alignment: AlignmentReport,
    /// Full-score diff over shared measures; None when the pair failed.
    pub report: Option<DiffReport>,
}

#[derive(Debug)]
pub struct RunReport {
    pub summaries: Vec<EvaluationSummary>,
    pub n_comparisons_emitted: u64,
    pub failures: Vec<FailureRecord>,
}

/// Full-score comparison of every unordered edition pair. A pair whose
/// measure numbering does not match on both sides is flagged (report
/// omitted), the others proceed.
pub fn compare_full(editions: &[Score], config: &DiffConfig) -> Vec<PairOutcome> {
    let mut outcomes = Vec::new();
    for i in 0..editions.len() {
        for j in (i + 1)..editions.len() {
            let (left, right) = (&editions[i], &editions[j]);
            let alignment = validate_alignment(left, right);
            let report = if alignment.is_comparable() {
                Some(diff_scores(left, right, None, config).expect("shared measures exist"))
            } else {
                None
            };
            outcomes.push(PairOutcome {
                left: left.edition_id.clone(),
                right: right.edition_id.clone(),
                alignment,
                report,
            });
        }
    }
    outcomes
}

pub fn load_editions(config: &ExperimentConfig) -> Result<Vec<Score>, ExperimentError> {
    if config.edition_paths.len() < 2 {
        return Err(ExperimentError::Config(
            "at least two edition files are required".into(),
        ));
    }
    let whitelist = match &config.whitelist_path {
        Some(path) => Whitelist::from_config(&fs::read_to_string(path)?),
        None => Whitelist::standard(),
    };
    let mut editions = Vec::new();
    for path in &config.edition_paths {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| ExperimentError::Config(format!("bad edition path {path:?}")))?
            .to_string();
        let bytes = fs::read(path)?;
        let score =
            parse_score(&bytes, &whitelist, &id).map_err(|source| ExperimentError::Score {
                path: path.display().to_string(),
                source,
            })?;
        editions.push(score);
    }
    let ids: BTreeSet<&String> = editions.iter().map(|e| &e.edition_id).collect();
    if ids.len() != editions.len() {
        return Err(ExperimentError::Config("duplicate edition ids".into()));
    }
    if !editions.iter().any(|e| e.edition_id == config.base_edition) {
        return Err(ExperimentError::Config(format!(
            "base_edition {:?} is not among the edition ids",
            config.base_edition
        )));
    }
    Ok(editions)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    if config.repetitions == 0 {
        return Err(ExperimentError::Config("repetitions must be >= 1".into()));
    }
    if config.algorithms.is_empty() {
        return Err(ExperimentError::Config("no algorithms selected".into()));
    }
    let editions = load_editions(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    pool.install(|| run_inner(config, &editions))
}

fn run_inner(
    config: &ExperimentConfig,
    editions: &[Score],
) -> Result<RunReport, ExperimentError> {
    let diff_config = DiffConfig::default();
    let base = editions
        .iter()
        .find(|e| e.edition_id == config.base_edition)
        .expect("validated in load_editions");
    let census = measure_census(base);
    if census.is_empty() {
        return Err(ExperimentError::Config(format!(
            "base edition {:?} has no measures",
            config.base_edition
        )));
    }
    let params = SamplingParams {
        fraction: config.fraction,
        tolerance: config.tolerance,
        sample_size_override: None,
    };
    let piece_id = config
        .piece_id
        .clone()
        .unwrap_or_else(|| config.base_edition.clone());

    let mut pairs = compare_full(editions, &diff_config);
    if let DiffSource::MusicdiffLogs { dir } = &config.diff_source {
        substitute_log_reports(&mut pairs, dir)?;
    }

    fs::create_dir_all(&config.output_dir)?;
    fs::create_dir_all(config.output_dir.join("hist"))?;

    let k = config.repetitions;
    let mut summaries = Vec::new();
    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut emitted: u64 = 0;

    for (algo_idx, &algorithm) in config.algorithms.iter().enumerate() {
        // Per-repetition seeds are a pure function of (master seed,
        // algorithm, repetition index): results do not depend on scheduling.
        let algo_master = config.master_seed ^ (algo_idx as u64).wrapping_mul(0xA5A5_A5A5_A5A5_A5A5);
        let samples: Vec<Sample> = (0..k)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(algo_master, rep as u64);
                draw(algorithm, &census, &params, seed).expect("census validated non-empty")
            })
            .collect();

        write_samples_jsonl(&config.output_dir, algorithm, &samples)?;

        // One delta per (sample, pair): Ok(delta) or a failure reason.
        let per_sample: Vec<Vec<Result<u64, String>>> = samples
            .par_iter()
            .map(|sample| {
                pairs
                    .iter()
                    .map(|pair| sampled_delta(sample, pair))
                    .collect()
            })
            .collect();

        let mut pair_aggs: Vec<Aggregate> = vec![Aggregate::default(); pairs.len()];
        for (rep, row) in per_sample.iter().enumerate() {
            for (pair_idx, outcome) in row.iter().enumerate() {
                match outcome {
                    Ok(delta) => {
                        pair_aggs[pair_idx].push(*delta);
                        emitted += 1;
                    }
                    Err(reason) => failures.push(FailureRecord {
                        algorithm,
                        sample_index: rep,
                        left: pairs[pair_idx].left.clone(),
                        right: pairs[pair_idx].right.clone(),
                        reason: reason.clone(),
                    }),
                }
            }
        }

        let mut pair_stats = Vec::new();
        for (pair, agg) in pairs.iter().zip(&pair_aggs) {
            let stats = match (&pair.report, agg.n) {
                (Some(report), n) if n > 0 => {
                    let mu = theoretical_mean(report.delta, config.fraction);
                    Some(PairStats {
                        pair: (pair.left.clone(), pair.right.clone()),
                        mu: mu.to_f64(),
                        empirical_mean: agg.mean(),
                        std_dev: agg.std_dev(),
                        histogram: agg.histogram.clone(),
                        n_samples: agg.n,
                    })
                }
                _ => None,
            };
            if let Some(stats) = &stats {
                write_histogram(&config.output_dir, algorithm, stats)?;
            }
            pair_stats.push(stats);
        }

        let measured: Vec<&PairStats> = pair_stats.iter().flatten().collect();
        let deviation_pairs: Vec<(f64, f64)> = measured
            .iter()
            .map(|s| (s.mu, s.empirical_mean))
            .collect();
        let delta = delta_metric(&deviation_pairs).unwrap_or(f64::NAN);
        let mean_sigma = if measured.is_empty() {
            f64::NAN
        } else {
            measured.iter().map(|s| s.std_dev).sum::<f64>() / measured.len() as f64
        };

        write_pairs_csv(&config.output_dir, algorithm, &pairs, &pair_stats)?;

        summaries.push(EvaluationSummary {
            piece_id: piece_id.clone(),
            algorithm,
            pair_stats: measured.into_iter().cloned().collect(),
            delta_metric: delta,
            mean_sigma,
        });
    }

    write_summary_csv(&config.output_dir, &summaries)?;
    write_failures_log(&config.output_dir, &failures)?;

    Ok(RunReport {
        summaries,
        n_comparisons_emitted: emitted,
        failures,
    })
}

fn sampled_delta(sample: &Sample, pair: &PairOutcome) -> Result<u64, String> {
    let report = match &pair.report {
        Some(report) => report,
        None => return Err("pair alignment failed".to_string()),
    };
    if sample.warning.is_some() {
        return Err("sample outside element bounds".to_string());
    }
    let shared: &[u32] = &pair.alignment.shared;
    for n in &sample.measure_numbers {
        if shared.binary_search(n).is_err() {
            return Err(format!("measure {n} not shared by the pair"));
        }
    }
    Ok(sample
        .measure_numbers
        .iter()
        .map(|n| report.per_measure.get(n).copied().unwrap_or(0))
        .sum())
}

fn substitute_log_reports(
    pairs: &mut [PairOutcome],
    dir: &Path,
) -> Result<(), ExperimentError> {
    for pair in pairs.iter_mut() {
        if pair.report.is_none() {
            continue;
        }
        let candidates = [
            dir.join(format!("{}__{}.txt", pair.left, pair.right)),
            dir.join(format!("{}__{}.txt", pair.right, pair.left)),
        ];
        match candidates.iter().find(|p| p.exists()) {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                pair.report = Some(parse_musicdiff_log(&text, &pair.left, &pair.right));
            }
            None => {
                pair.report = None; // treated like an alignment failure downstream
            }
        }
    }
    Ok(())
}

fn fmt2(value: f64) -> String {
    if value.is_nan() {
        "NA".to_string()
    } else {
        format!("{:.2}", round2(value))
    }
}

fn write_summary_csv(
    output_dir: &Path,
    summaries: &[EvaluationSummary],
) -> Result<(), ExperimentError> {
    let mut out = String::from("piece_id,algorithm,delta,mean_sigma,n_pairs\n");
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.piece_id,
            s.algorithm.name(),
            fmt2(s.delta_metric),
            fmt2(s.mean_sigma),
            s.pair_stats.len()
        )
        .unwrap();
    }
    fs::write(output_dir.join("summary.csv"), out)?;
    Ok(())
}

fn write_pairs_csv(
    output_dir: &Path,
    algorithm: Algorithm,
    pairs: &[PairOutcome],
    stats: &[Option<PairStats>],
) -> Result<(), ExperimentError> {
    let mut out = String::from("left,right,n_comparisons,mu,empirical_mean,std_dev,status\n");
    for (pair, stat) in pairs.iter().zip(stats) {
        match stat {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{},{},ok",
                pair.left,
                pair.right,
                s.n_samples,
                fmt2(s.mu),
                fmt2(s.empirical_mean),
                fmt2(s.std_dev)
            )
            .unwrap(),
            None => writeln!(out, "{},{},0,NA,NA,NA,failed", pair.left, pair.right).unwrap(),
        }
    }
    fs::write(
        output_dir.join(format!("pairs_{}.csv", algorithm.name())),
        out,
    )?;
    Ok(())
}

fn write_histogram(
    output_dir: &Path,
    algorithm: Algorithm,
    stats: &PairStats,
) -> Result<(), ExperimentError> {
    let mut out = String::from("delta,frequency\n");
    for (value, freq) in &stats.histogram {
        writeln!(out, "{value},{freq}").unwrap();
    }
    let name = format!(
        "{}__{}_{}.csv",
        stats.pair.0,
        stats.pair.1,
        algorithm.name()
    );
    fs::write(output_dir.join("hist").join(name), out)?;
    Ok(())
}

fn write_samples_jsonl(
    output_dir: &Path,
    algorithm: Algorithm,
    samples: &[Sample],
) -> Result<(), ExperimentError> {
    let mut out = String::new();
    for sample in samples {
        out.push_str(&serde_json::to_string(sample).expect("sample serializes"));
        out.push('\n');
    }
    fs::write(
        output_dir.join(format!("samples_{}.jsonl", algorithm.name())),
        out,
    )?;
    Ok(())
}

fn write_failures_log(
    output_dir: &Path,
    failures: &[FailureRecord],
) -> Result<(), ExperimentError> {
    let mut out = String::new();
    for f in failures {
        writeln!(
            out,
            "algorithm={} sample={} pair={}|{} reason={}",
            f.algorithm.name(),
            f.sample_index,
            f.left,
            f.right,
            f.reason
        )
        .unwrap();
    }
    fs::write(output_dir.join("failures.log"), out)?;
    Ok(())
}
