//! Perceptual scores for multi-modal classifiers.
//!
//! A modality's perceptual score is the drop in a model's per-sample metric
//! when that modality is replaced by the same modality of a uniformly drawn
//! test sample, averaged over the test set and normalized either by the gap
//! between perfect and majority-vote performance or by the model's own score.
//!
//! - [`score`] turns per-task metric values into sample and dataset scores.
//! - [`plan`] builds the seeded donor assignments.
//! - [`metrics`] holds the per-sample metrics and train-split baselines.
//! - [`protocol`] reads and writes the JSONL plan, prediction and report files.
//! - [`bias`] builds prior-shift tables and mines low-score samples.
//! - [`synth`] generates the synthetic benchmark and its reference models.

pub mod bias;
pub mod error;
pub mod metrics;
pub mod modality;
pub mod plan;
pub mod protocol;
pub mod score;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{LabelSpec, Metric, PredictionSpec};
pub use modality::{ModalityId, ModalitySet};
pub use plan::{build_exact_plan, build_plan, PermutationPlan, PlanTask, TaskKind};
pub use score::{
    dataset_perceptual_score, group_breakdown, permuted_modality_score, sample_perceptual_score, Baselines, Mode,
    RunConfig, SampleEvaluation, ScoreTriple,
};
pub use stats::MeanStd;
