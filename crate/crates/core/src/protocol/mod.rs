//! Line-delimited JSON file protocol between the framework and any external
//! model: samples in, plan out, predictions in, report out.

mod ingest;
mod records;
mod report;

pub use ingest::{assemble_evaluations, evaluate_in_process, ingest_predictions, Ingested, PredictionSink};
pub use records::{
    read_plan, read_predictions, read_samples, write_plan, write_predictions, Header, PredictionRecord, SampleRecord,
    Split, PLAN_SCHEMA, PREDICTIONS_SCHEMA, REPORT_SCHEMA, SAMPLES_SCHEMA, SCHEMA_VERSION,
};
pub use report::{
    compute_baselines, render_report, score_run, Format, SampleScore, ScoreOptions, ScoreReport, SubsetReport,
};
