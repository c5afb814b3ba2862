//! bardiff: measure sampling and edit-operation comparison for XML-encoded
//! musical scores.
//!
//! The pipeline: parse editions into a measure model ([`score`]), draw
//! measure samples with one of three strategies ([`sampler`]), count edit
//! operations between editions ([`diff`]), evaluate how representative the
//! sampled counts are of the full-score counts ([`eval`]), and do all of it
//! end to end over many repetitions ([`experiment`]). [`synth`] generates
//! paired synthetic editions with planted ground-truth differences for
//! validating the pipeline without real encodings.

pub mod diff;
pub mod eval;
pub mod experiment;
pub mod ratio;
pub mod sampler;
pub mod score;
pub mod synth;

/// RNG identity reported by `--version`; changing the generator or its
/// seeding breaks bit-reproducibility and must bump this string.
pub const RNG_ID: &str = "ChaCha8Rng(seed_from_u64)/rand-0.8";
