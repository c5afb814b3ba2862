//! Descriptive statistics over sampled diff counts: theoretical and
//! empirical means, population standard deviation, integer-binned
//! histograms, the mean-absolute-deviation metric and duplicate-sample
//! detection.

use crate::ratio::Ratio;
use crate::sampler::Sample;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("k = {k} exceeds n = {n}")]
    Domain { n: u64, k: u64 },
}

/// Moment accumulator with an exact associative merge:
/// counts, Σ and Σ² combine component-wise, histograms add.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
    pub histogram: BTreeMap<u64, u64>,
}

impl Aggregate {
    pub fn push(&mut self, delta: u64) {
        self.n += 1;
        self.sum += delta as u128;
        self.sum_sq += (delta as u128) * (delta as u128);
        *self.histogram.entry(delta).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &Aggregate) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        for (value, freq) in &other.histogram {
            *self.histogram.entry(*value).or_insert(0) += freq;
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    /// Population standard deviation: the 10,000-draw set is treated as the
    /// full empirical distribution.
    pub fn std_dev(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.mean();
        let var = self.sum_sq as f64 / n - mean * mean;
        var.max(0.0).sqrt()
    }
}

pub fn aggregate(deltas: &[u64]) -> Result<Aggregate, StatsError> {
    if deltas.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut agg = Aggregate::default();
    for &d in deltas {
        agg.push(d);
    }
    Ok(agg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub pair: (String, String),
    pub mu: f64,
    pub empirical_mean: f64,
    pub std_dev: f64,
    pub histogram: BTreeMap<u64, u64>,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub piece_id: String,
    pub algorithm: crate::sampler::Algorithm,
    pub pair_stats: Vec<PairStats>,
    pub delta_metric: f64,
    pub mean_sigma: f64,
}

/// The expected sampled difference count: fraction × full-score delta,
/// kept exact.
pub fn theoretical_mean(delta_full: u64, fraction: Ratio) -> Ratio {
    fraction.mul_int(delta_full)
}

/// Mean absolute deviation |μ − δ̄| over edition pairs.
pub fn delta_metric(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let total: f64 = pairs.iter().map(|(mu, emp)| (mu - emp).abs()).sum();
    Ok(total / pairs.len() as f64)
}

/// Number of samples whose measure-number set repeats an earlier sample's.
pub fn detect_duplicates(samples: &[Sample]) -> usize {
    let mut seen: HashSet<&[u32]> = HashSet::new();
    samples
        .iter()
        .filter(|s| !seen.insert(&s.measure_numbers))
        .count()
}

/// Exact binomial coefficient.
pub fn combinations(n: u64, k: u64) -> Result<BigUint, StatsError> {
    if k > n {
        return Err(StatsError::Domain { n, k });
    }
    let k = k.min(n - k);
    let mut result = BigUint::from(1u32);
    for i in 0..k {
        result = result * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    Ok(result)
}

/// Two-decimal rounding applied at serialization time (half away from zero).
pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Algorithm;

    #[test]
    fn theoretical_mean_is_exact() {
        assert_eq!(theoretical_mean(250, Ratio::new(1, 10)).to_f64(), 25.0);
        assert_eq!(theoretical_mean(0, Ratio::new(1, 10)).to_f64(), 0.0);
        let mu = theoretical_mean(97, Ratio::new(1, 10));
        assert_eq!(mu, Ratio::new(97, 10));
        assert_eq!(mu.round2(), 9.7);
    }

    #[test]
    fn aggregate_basics() {
        let a = aggregate(&[5, 5, 5]).unwrap();
        assert_eq!(a.mean(), 5.0);
        assert_eq!(a.std_dev(), 0.0);
        let b = aggregate(&[0, 10]).unwrap();
        assert_eq!(b.mean(), 5.0);
        assert_eq!(b.std_dev(), 5.0);
        assert!(matches!(aggregate(&[]), Err(StatsError::Empty)));
    }

    #[test]
    fn aggregate_matches_two_pass_oracle() {
        // Streaming moments vs an independent two-pass computation.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let draws: Vec<u64> = (0..10_000).map(|_| rng.gen_range(0..500)).collect();
        let agg = aggregate(&draws).unwrap();

        let n = draws.len() as f64;
        let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / n;
        let var = draws
            .iter()
            .map(|&d| {
                let diff = d as f64 - mean;
                diff * diff
            })
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        assert!((agg.mean() - mean).abs() / mean.abs() < 1e-9);
        assert!((agg.std_dev() - sd).abs() / sd.abs() < 1e-9);
    }

    #[test]
    fn aggregate_merge_is_exact() {
        let all = aggregate(&[1, 2, 3, 4, 5, 6]).unwrap();
        let mut left = aggregate(&[1, 2, 3]).unwrap();
        let right = aggregate(&[4, 5, 6]).unwrap();
        left.merge(&right);
        assert_eq!(left, all);
    }

    #[test]
    fn histogram_conserves_sample_count() {
        let agg = aggregate(&[3, 3, 7, 9, 9, 9]).unwrap();
        let total: u64 = agg.histogram.values().sum();
        assert_eq!(total, agg.n);
    }

    #[test]
    fn delta_metric_averages_absolute_deviations() {
        assert_eq!(delta_metric(&[(5.0, 5.0), (7.0, 7.0)]).unwrap(), 0.0);
        let ones: Vec<(f64, f64)> = (0..15).map(|i| (i as f64 + 1.0, i as f64)).collect();
        assert_eq!(delta_metric(&ones).unwrap(), 1.0);
        // Table-1 bottom row: the per-piece averages
        let col = [1.95, 2.67, 3.22, 3.92, 2.54];
        let pairs: Vec<(f64, f64)> = col.iter().map(|&v| (v, 0.0)).collect();
        assert_eq!(round2(delta_metric(&pairs).unwrap()), 2.86);
    }

    #[test]
    fn delta_metric_is_symmetric_in_pair_order() {
        let a = delta_metric(&[(1.0, 3.0), (5.0, 2.0)]).unwrap();
        let b = delta_metric(&[(5.0, 2.0), (1.0, 3.0)]).unwrap();
        let c = delta_metric(&[(3.0, 1.0), (2.0, 5.0)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    fn sample_with(numbers: &[u32]) -> Sample {
        Sample {
            algorithm: Algorithm::RandSel,
            measure_numbers: numbers.to_vec(),
            element_sum: 0,
            seed: 0,
            warning: None,
        }
    }

    #[test]
    fn duplicate_detection_compares_sets() {
        let distinct = vec![sample_with(&[1, 2]), sample_with(&[1, 3])];
        assert_eq!(detect_duplicates(&distinct), 0);
        let repeated = vec![
            sample_with(&[1, 2]),
            sample_with(&[3, 4]),
            sample_with(&[1, 2]),
        ];
        assert_eq!(detect_duplicates(&repeated), 1);
    }

    #[test]
    fn combinations_exact_values() {
        assert_eq!(
            combinations(70, 7).unwrap(),
            BigUint::from(1_198_774_720u64)
        );
        assert_eq!(
            combinations(100, 10).unwrap(),
            BigUint::from(17_310_309_456_440u64)
        );
        assert_eq!(combinations(5, 0).unwrap(), BigUint::from(1u32));
        assert!(matches!(
            combinations(3, 4),
            Err(StatsError::Domain { n: 3, k: 4 })
        ));
    }
}
