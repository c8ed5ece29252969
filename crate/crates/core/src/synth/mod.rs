//! Three-modality synthetic benchmark with a multiplicative interaction
//! between blocks `a` and `b` and a block `c` whose informativeness grows with
//! its variance, plus the two reference models trained on it.

mod data;
mod model;
mod sweep;

pub use data::{generate_dataset, BlockLayout, LabelRule, LatentPoint, SyntheticConfig, SyntheticDataset};
pub use model::{
    accuracy, train_logistic, train_mlp, BlockScorer, LinearModel, MlpGradient, MlpModel, Projected, TrainConfig,
    TrainSummary,
};
pub use sweep::{
    average_over_seeds, evaluate_model, render_sweep_csv, render_sweep_table, run_variance_sweep, BlockScores,
    ModelKind, SweepConfig, SweepRow, BLOCKS,
};
