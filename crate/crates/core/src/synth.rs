//! Synthetic paired editions with planted, ground-truth differences.
//!
//! A planted difference is an attribute flip on one element (one Modify in
//! the diff). Elements carry an `alt` marker once flipped, so sequential
//! plants on the same score never revert an earlier flip and per-measure
//! ground truth stays exact across compositions.

use crate::score::{Measure, MeasureCensus, NotationElement, Score, StaffSeq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

const ALT_ATTR: &str = "alt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantMode {
    Uniform,
    DensityCorrelated,
    Propagating,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferencePlan {
    pub mode: PlantMode,
    pub total_differences: u64,
    #[serde(default = "default_span")]
    pub propagation_span: usize,
    pub rng_seed: u64,
}

fn default_span() -> usize {
    1
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("density profile has a negative entry")]
    NegativeDensity,
    #[error("profile length {profile} does not match measure count {measures}")]
    ProfileMismatch { profile: usize, measures: usize },
    #[error("plan is infeasible: {0}")]
    PlanError(String),
}

const PITCHES: [&str; 7] = ["c", "d", "e", "f", "g", "a", "b"];

/// Builds a single-staff score, measures numbered 1..=n, whose census equals
/// the density profile exactly.
pub fn generate_base_score(
    edition_id: &str,
    density_profile: &[i64],
) -> Result<Score, SynthError> {
    if density_profile.iter().any(|&d| d < 0) {
        return Err(SynthError::NegativeDensity);
    }
    let measures = density_profile
        .iter()
        .enumerate()
        .map(|(idx, &density)| {
            let number = idx as u32 + 1;
            let elements = (0..density as usize)
                .map(|i| {
                    NotationElement::new("note")
                        .with_attr("pname", PITCHES[i % PITCHES.len()])
                        .with_attr("oct", "4")
                        .with_attr("dur", "8")
                        .with_attr("stem.dir", "up")
                })
                .collect();
            Measure {
                number,
                staves: vec![StaffSeq {
                    number: 1,
                    elements,
                }],
            }
        })
        .collect();
    Ok(Score {
        edition_id: edition_id.to_string(),
        measures,
        header_context: vec![
            "<scoreDef meter.count=\"4\" meter.unit=\"4\"><staffGrp><staffDef n=\"1\" lines=\"5\" clef.shape=\"G\" clef.line=\"2\"/></staffGrp></scoreDef>".to_string(),
        ],
    })
}

fn flip(element: &mut NotationElement) {
    element
        .attrs
        .insert(ALT_ATTR.to_string(), "1".to_string());
}

fn is_virgin(element: &NotationElement) -> bool {
    !element.attrs.contains_key(ALT_ATTR)
}

fn virgin_positions(measure: &Measure) -> Vec<(usize, usize)> {
    measure
        .staves
        .iter()
        .enumerate()
        .flat_map(|(si, staff)| {
            staff
                .elements
                .iter()
                .enumerate()
                .filter(|(_, e)| is_virgin(e))
                .map(move |(ei, _)| (si, ei))
        })
        .collect()
}

/// Plants `plan.total_differences` attribute flips into a copy of `base`
/// according to the plan's distribution mode. Returns the mutated score and
/// the exact per-measure planted counts.
pub fn plant_differences(
    base: &Score,
    plan: &DifferencePlan,
) -> Result<(Score, BTreeMap<u32, u64>), SynthError> {
    let mut mutated = base.clone();
    let mut ground_truth: BTreeMap<u32, u64> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let census = crate::score::measure_census(base);

    match plan.mode {
        PlantMode::Uniform => {
            for _ in 0..plan.total_differences {
                plant_one_weighted(&mut mutated, &mut ground_truth, &mut rng, |_| 1)?;
            }
        }
        PlantMode::DensityCorrelated => {
            for _ in 0..plan.total_differences {
                plant_one_weighted(&mut mutated, &mut ground_truth, &mut rng, |m| {
                    census.counts.get(&m.number).copied().unwrap_or(0)
                })?;
            }
        }
        PlantMode::Propagating => {
            if plan.propagation_span == 0 {
                return Err(SynthError::PlanError("propagation_span must be >= 1".into()));
            }
            let mut remaining = plan.total_differences;
            while remaining > 0 {
                let cluster = (plan.propagation_span as u64).min(remaining) as usize;
                plant_cluster(&mut mutated, &mut ground_truth, &mut rng, cluster)?;
                remaining -= cluster as u64;
            }
        }
    }
    Ok((mutated, ground_truth))
}

fn plant_one_weighted(
    score: &mut Score,
    ground_truth: &mut BTreeMap<u32, u64>,
    rng: &mut ChaCha8Rng,
    weight: impl Fn(&Measure) -> u64,
) -> Result<(), SynthError> {
    // Weighted choice over measures that still have an unflipped element.
    let candidates: Vec<(usize, u64)> = score
        .measures
        .iter()
        .enumerate()
        .filter(|(_, m)| m.elements().any(is_virgin))
        .map(|(i, m)| (i, weight(m)))
        .filter(|(_, w)| *w > 0)
        .collect();
    let total_weight: u64 = candidates.iter().map(|(_, w)| w).sum();
    if total_weight == 0 {
        return Err(SynthError::PlanError(
            "no element left to modify".to_string(),
        ));
    }
    let mut pick = rng.gen_range(0..total_weight);
    let measure_idx = candidates
        .iter()
        .find(|(_, w)| {
            if pick < *w {
                true
            } else {
                pick -= w;
                false
            }
        })
        .map(|(i, _)| *i)
        .expect("cumulative weights cover the draw");

    let measure = &mut score.measures[measure_idx];
    let positions = virgin_positions(measure);
    let (si, ei) = positions[rng.gen_range(0..positions.len())];
    flip(&mut measure.staves[si].elements[ei]);
    *ground_truth.entry(measure.number).or_insert(0) += 1;
    Ok(())
}

/// Places one cluster of `span` consecutive unflipped elements inside a
/// single staff of a single measure.
fn plant_cluster(
    score: &mut Score,
    ground_truth: &mut BTreeMap<u32, u64>,
    rng: &mut ChaCha8Rng,
    span: usize,
) -> Result<(), SynthError> {
    let mut slots: Vec<(usize, usize, usize)> = Vec::new();
    for (mi, measure) in score.measures.iter().enumerate() {
        for (si, staff) in measure.staves.iter().enumerate() {
            if staff.elements.len() < span {
                continue;
            }
            for start in 0..=(staff.elements.len() - span) {
                if staff.elements[start..start + span].iter().all(is_virgin) {
                    slots.push((mi, si, start));
                }
            }
        }
    }
    if slots.is_empty() {
        return Err(SynthError::PlanError(format!(
            "no run of {span} unflipped elements left in any measure"
        )));
    }
    let (mi, si, start) = slots[rng.gen_range(0..slots.len())];
    let measure = &mut score.measures[mi];
    for e in &mut measure.staves[si].elements[start..start + span] {
        flip(e);
    }
    *ground_truth.entry(measure.number).or_insert(0) += span as u64;
    Ok(())
}

/// Convenience for tests and the CLI: census of a profile-backed score.
pub fn census_of_profile(profile: &[i64]) -> Result<MeasureCensus, SynthError> {
    Ok(crate::score::measure_census(&generate_base_score(
        "profile", profile,
    )?))
}
