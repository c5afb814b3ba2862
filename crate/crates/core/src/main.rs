use bardiff::diff::{diff_scores, DiffConfig};
use bardiff::eval::round2;
use bardiff::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use bardiff::ratio::Ratio;
use bardiff::sampler::{draw, Algorithm, SamplingParams};
use bardiff::score::{measure_census, parse_score, Whitelist};
use bardiff::synth::{generate_base_score, plant_differences, DifferencePlan};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bardiff",
    version = concat!(env!("CARGO_PKG_VERSION"), " (rng: ChaCha8Rng(seed_from_u64)/rand-0.8)"),
    about = "Measure sampling and edit-operation comparison for XML score encodings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the per-measure element census of a score file.
    Census {
        file: PathBuf,
        #[arg(long)]
        whitelist: Option<PathBuf>,
    },
    /// Count edit operations between two score files.
    Diff {
        left: PathBuf,
        right: PathBuf,
        /// Restrict to a comma-separated list of measure numbers.
        #[arg(long, value_delimiter = ',')]
        measures: Option<Vec<u32>>,
        #[arg(long)]
        whitelist: Option<PathBuf>,
    },
    /// Draw one measure sample from a score file.
    Sample {
        file: PathBuf,
        /// One of: randsel, barelcount, onlyel.
        #[arg(long)]
        algorithm: String,
        #[arg(long)]
        seed: u64,
        /// Sampling fraction as num/den (default 1/10).
        #[arg(long)]
        fraction: Option<String>,
        #[arg(long)]
        whitelist: Option<PathBuf>,
    },
    /// Generate a synthetic edition pair with planted differences.
    Synth {
        #[arg(long)]
        plan: PathBuf,
    },
}

/// JSON config for the `synth` subcommand.
#[derive(Deserialize)]
struct SynthSpec {
    n_measures: usize,
    /// Either a full per-measure profile or a single density for all bars.
    #[serde(default)]
    density_profile: Option<Vec<i64>>,
    #[serde(default)]
    density: Option<i64>,
    plan: DifferencePlan,
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn load_whitelist(path: &Option<PathBuf>) -> Result<Whitelist, CliError> {
    match path {
        Some(p) => Ok(Whitelist::from_config(&fs::read_to_string(p)?)),
        None => Ok(Whitelist::standard()),
    }
}

fn load_score(path: &PathBuf, whitelist: &Whitelist) -> Result<bardiff::score::Score, CliError> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("score")
        .to_string();
    let bytes = fs::read(path)?;
    parse_score(&bytes, whitelist, &id).map_err(|e| CliError::Runtime(e.to_string()))
}

fn parse_ratio(s: &str) -> Result<Ratio, CliError> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| CliError::Config(format!("fraction {s:?} must look like 1/10")))?;
    let num = num
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad numerator in {s:?}")))?;
    let den: u64 = den
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad denominator in {s:?}")))?;
    if den == 0 {
        return Err(CliError::Config("zero denominator".into()));
    }
    Ok(Ratio::new(num, den))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {config:?}: {e}")))?;
            let config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
            let report = run_experiment(&config).map_err(|e| match e {
                ExperimentError::Config(msg) => CliError::Config(msg),
                other => CliError::Runtime(other.to_string()),
            })?;
            println!(
                "comparisons={} failures={}",
                report.n_comparisons_emitted,
                report.failures.len()
            );
            for s in &report.summaries {
                println!(
                    "{}: delta={:.2} mean_sigma={:.2} pairs={}",
                    s.algorithm.name(),
                    round2(s.delta_metric),
                    round2(s.mean_sigma),
                    s.pair_stats.len()
                );
            }
            Ok(())
        }
        Command::Census { file, whitelist } => {
            let wl = load_whitelist(&whitelist)?;
            let score = load_score(&file, &wl)?;
            let census = measure_census(&score);
            println!("measure,count");
            for (n, c) in &census.counts {
                println!("{n},{c}");
            }
            println!("total,{}", census.total);
            Ok(())
        }
        Command::Diff {
            left,
            right,
            measures,
            whitelist,
        } => {
            let wl = load_whitelist(&whitelist)?;
            let left = load_score(&left, &wl)?;
            let right = load_score(&right, &wl)?;
            let selection: Option<BTreeSet<u32>> =
                measures.map(|m| m.into_iter().collect());
            let report = diff_scores(&left, &right, selection.as_ref(), &DiffConfig::default())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            print!("{}", report.to_csv());
            println!("delta,,,{}", report.delta);
            Ok(())
        }
        Command::Sample {
            file,
            algorithm,
            seed,
            fraction,
            whitelist,
        } => {
            let algorithm: Algorithm = algorithm.parse().map_err(CliError::Config)?;
            let wl = load_whitelist(&whitelist)?;
            let score = load_score(&file, &wl)?;
            let census = measure_census(&score);
            let mut params = SamplingParams::default();
            if let Some(f) = fraction {
                params.fraction = parse_ratio(&f)?;
            }
            let sample = draw(algorithm, &census, &params, seed)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{}", serde_json::to_string(&sample).expect("serializes"));
            Ok(())
        }
        Command::Synth { plan } => {
            let text = fs::read_to_string(&plan)
                .map_err(|e| CliError::Config(format!("cannot read {plan:?}: {e}")))?;
            let spec: SynthSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid plan: {e}")))?;
            let profile = match (&spec.density_profile, spec.density) {
                (Some(p), _) if p.len() == spec.n_measures => p.clone(),
                (Some(p), _) => {
                    return Err(CliError::Config(format!(
                        "density_profile has {} entries, expected {}",
                        p.len(),
                        spec.n_measures
                    )))
                }
                (None, Some(d)) => vec![d; spec.n_measures],
                (None, None) => {
                    return Err(CliError::Config(
                        "plan needs density_profile or density".into(),
                    ))
                }
            };
            let base = generate_base_score("base", &profile)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let (mutated, truth) = plant_differences(&base, &spec.plan)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            fs::create_dir_all(&spec.output_dir)?;
            fs::write(
                spec.output_dir.join("base.xml"),
                bardiff::score::emit(&base),
            )?;
            let mut mutated = mutated;
            mutated.edition_id = "mutated".to_string();
            fs::write(
                spec.output_dir.join("mutated.xml"),
                bardiff::score::emit(&mutated),
            )?;
            fs::write(
                spec.output_dir.join("ground_truth.json"),
                serde_json::to_string_pretty(&truth).expect("serializes"),
            )?;
            println!(
                "wrote base.xml, mutated.xml, ground_truth.json to {}",
                spec.output_dir.display()
            );
            Ok(())
        }
    }
}
