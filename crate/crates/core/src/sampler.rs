//! The three measure-sampling strategies, all pure functions of
//! (census, params, seed).
//!
//! RNG: ChaCha8 (`rand_chacha::ChaCha8Rng`, rand 0.8 stream semantics),
//! seeded with `seed_from_u64`. This is part of the reproducibility
//! contract; `--version` reports it.

use crate::ratio::Ratio;
use crate::score::MeasureCensus;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Algorithm {
    RandSel,
    BarElCount,
    OnlyEl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::RandSel, Algorithm::BarElCount, Algorithm::OnlyEl];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::RandSel => "randSel",
            Algorithm::BarElCount => "barElCount",
            Algorithm::OnlyEl => "onlyEl",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "randsel" => Ok(Algorithm::RandSel),
            "barelcount" => Ok(Algorithm::BarElCount),
            "onlyel" => Ok(Algorithm::OnlyEl),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundWarning {
    BelowLowerBound,
    AboveUpperBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub algorithm: Algorithm,
    pub measure_numbers: Vec<u32>,
    pub element_sum: u64,
    pub seed: u64,
    pub warning: Option<BoundWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub fraction: Ratio,
    pub tolerance: Ratio,
    pub sample_size_override: Option<usize>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            fraction: Ratio::new(1, 10),
            tolerance: Ratio::new(5, 100),
            sample_size_override: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("requested sample size {requested} exceeds {available} measures")]
    SizeError { requested: usize, available: usize },
    #[error("census is empty")]
    EmptyCensus,
}

pub fn required_sample_size(
    census: &MeasureCensus,
    params: &SamplingParams,
) -> Result<usize, SampleError> {
    if census.is_empty() {
        return Err(SampleError::EmptyCensus);
    }
    match params.sample_size_override {
        Some(size) if size > census.len() => Err(SampleError::SizeError {
            requested: size,
            available: census.len(),
        }),
        Some(size) => Ok(size),
        None => Ok(params.fraction.ceil_mul(census.len() as u64) as usize),
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sorted_keys(census: &MeasureCensus) -> Vec<u32> {
    census.counts.keys().copied().collect()
}

/// Uniform selection of the required number of measures, without replacement
/// and without any element-count constraint.
pub fn rand_sel(
    census: &MeasureCensus,
    params: &SamplingParams,
    seed: u64,
) -> Result<Sample, SampleError> {
    let required = required_sample_size(census, params)?;
    let keys = sorted_keys(census);
    let mut rng = rng_for(seed);
    let mut chosen: Vec<u32> = keys.choose_multiple(&mut rng, required).copied().collect();
    chosen.sort_unstable();
    let element_sum = census.sum_over(&chosen);
    Ok(Sample {
        algorithm: Algorithm::RandSel,
        measure_numbers: chosen,
        element_sum,
        seed,
        warning: None,
    })
}

/// Exact element-sum bounds without floating point.
/// The target is `target_num / target_den` elements; the closed interval is
/// [(1 - tol) * target, (1 + tol) * target].
struct Bounds {
    target_num: u128,
    target_den: u128,
    tol: Ratio,
}

impl Bounds {
    fn below(&self, sum: u64) -> bool {
        // sum < (1 - tol) * target
        let lhs = sum as u128 * self.target_den * self.tol.den as u128;
        let rhs = (self.tol.den - self.tol.num) as u128 * self.target_num;
        lhs < rhs
    }

    fn above(&self, sum: u64) -> bool {
        // sum > (1 + tol) * target
        let lhs = sum as u128 * self.target_den * self.tol.den as u128;
        let rhs = (self.tol.den + self.tol.num) as u128 * self.target_num;
        lhs > rhs
    }

    fn warning(&self, sum: u64) -> Option<BoundWarning> {
        if self.below(sum) {
            Some(BoundWarning::BelowLowerBound)
        } else if self.above(sum) {
            Some(BoundWarning::AboveUpperBound)
        } else {
            None
        }
    }
}

/// Selection constrained on both the measure count and the element sum.
///
/// Target element count is `total * required / n_measures`, kept as an exact
/// rational. The add/evict loop runs for at most `n_measures` attempts; if
/// the bounds cannot be met the best-effort selection is returned with a
/// warning instead of an error.
pub fn bar_el_count(
    census: &MeasureCensus,
    params: &SamplingParams,
    seed: u64,
) -> Result<Sample, SampleError> {
    let required = required_sample_size(census, params)?;
    let n_measures = census.len();
    let bounds = Bounds {
        target_num: census.total as u128 * required as u128,
        target_den: n_measures as u128,
        tol: params.tolerance,
    };

    let mut rng = rng_for(seed);
    let mut available = sorted_keys(census);
    let mut selection: Vec<u32> = Vec::with_capacity(required + 1);
    let mut current_sum: u64 = 0;
    let max_attempts = n_measures;
    let mut attempts = 0usize;

    while selection.len() != required || bounds.below(current_sum) {
        if !available.is_empty() {
            let idx = rng.gen_range(0..available.len());
            let picked = available.swap_remove(idx);
            current_sum += census.counts[&picked];
            selection.push(picked);
        }
        if selection.len() > required {
            let idx = rng.gen_range(0..selection.len());
            let evicted = selection.swap_remove(idx);
            current_sum -= census.counts[&evicted];
            available.push(evicted);
        }
        attempts += 1;
        while bounds.above(current_sum) && !selection.is_empty() {
            let idx = rng.gen_range(0..selection.len());
            let evicted = selection.swap_remove(idx);
            current_sum -= census.counts[&evicted];
            available.push(evicted);
        }
        if attempts == max_attempts {
            break;
        }
    }

    selection.sort_unstable();
    let mut warning = bounds.warning(current_sum);
    if warning.is_none() && selection.len() != required {
        // Bounds met but the measure count was not; surface it as a warning
        // so the caller can record and skip, mirroring the bound failures.
        warning = Some(if selection.len() < required {
            BoundWarning::BelowLowerBound
        } else {
            BoundWarning::AboveUpperBound
        });
    }
    Ok(Sample {
        algorithm: Algorithm::BarElCount,
        measure_numbers: selection,
        element_sum: current_sum,
        seed,
        warning,
    })
}

/// Selection constrained only on the element sum; the measure count is free.
/// Target element count is `ceil(fraction * total)` (an integer).
pub fn only_el(
    census: &MeasureCensus,
    params: &SamplingParams,
    seed: u64,
) -> Result<Sample, SampleError> {
    if census.is_empty() {
        return Err(SampleError::EmptyCensus);
    }
    let required_elements = params.fraction.ceil_mul(census.total);
    let bounds = Bounds {
        target_num: required_elements as u128,
        target_den: 1,
        tol: params.tolerance,
    };

    let mut rng = rng_for(seed);
    let mut available = sorted_keys(census);
    let mut selection: Vec<u32> = Vec::new();
    let mut current_sum: u64 = 0;
    let max_attempts = census.len();
    let mut attempts = 0usize;

    while bounds.below(current_sum) && attempts < max_attempts {
        if available.is_empty() {
            break;
        }
        let idx = rng.gen_range(0..available.len());
        let picked = available.swap_remove(idx);
        current_sum += census.counts[&picked];
        selection.push(picked);
        attempts += 1;
    }
    while bounds.above(current_sum) && !selection.is_empty() {
        let idx = rng.gen_range(0..selection.len());
        let evicted = selection.swap_remove(idx);
        current_sum -= census.counts[&evicted];
    }

    selection.sort_unstable();
    Ok(Sample {
        algorithm: Algorithm::OnlyEl,
        measure_numbers: selection,
        element_sum: current_sum,
        seed,
        warning: bounds.warning(current_sum),
    })
}

pub fn draw(
    algorithm: Algorithm,
    census: &MeasureCensus,
    params: &SamplingParams,
    seed: u64,
) -> Result<Sample, SampleError> {
    match algorithm {
        Algorithm::RandSel => rand_sel(census, params, seed),
        Algorithm::BarElCount => bar_el_count(census, params, seed),
        Algorithm::OnlyEl => only_el(census, params, seed),
    }
}

/// Per-repetition seed derivation: a pure function of (master_seed, index)
/// so that any scheduling of repetitions reproduces the sequential run.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(splitmix64(index)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}
