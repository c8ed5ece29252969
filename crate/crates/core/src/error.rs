use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    #[error("duplicate sample_id `{0}`")]
    DuplicateSample(String),

    #[error("duplicate task_id {0}")]
    DuplicateTask(u64),

    #[error("no valid donor: exclude_self requires at least two samples")]
    NoValidDonor,

    #[error("incomplete predictions for sample `{sample_id}`, subset {subset}")]
    IncompleteEvaluation { sample_id: String, subset: String },

    #[error("missing predictions for {} task(s): {}", .task_ids.len(), preview(.task_ids))]
    MissingPredictions { task_ids: Vec<u64> },

    #[error("prediction for task {task_id} does not match the label: {reason}")]
    PredictionMismatch { task_id: u64, reason: String },

    #[error("task normalization undefined: majority baseline is 1")]
    TaskNormalizationUndefined,

    #[error("model normalization undefined: clean score is 0")]
    ModelNormalizationUndefined,

    #[error("sample `{0}` has no group")]
    MissingGroup(String),

    #[error("no baseline for group `{0}`")]
    MissingBaseline(String),

    #[error("empty training split{}", .0.as_ref().map(|g| format!(" for group `{g}`")).unwrap_or_default())]
    EmptyTrain(Option<String>),

    #[error("rejection sampling exceeded {0} attempts for one point")]
    RejectionLimit(u64),

    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("training reached only {:.1}% train accuracy", .0 * 100.0)]
    TrainingFailed(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by predictions that do not cover the plan.
    pub fn is_incomplete(&self) -> bool {
        matches!(
            self,
            Error::MissingPredictions { .. } | Error::IncompleteEvaluation { .. }
        )
    }
}

fn preview(ids: &[u64]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}
