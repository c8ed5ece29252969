use std::collections::HashMap;
use std::io::BufRead;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{LabelSpec, Metric, PredictionSpec};
use crate::plan::{PermutationPlan, PlanTask, TaskKind};
use crate::score::SampleEvaluation;

use super::records::{read_predictions, PredictionRecord};

/// Per-sample evaluations joined from a plan and its predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// In plan sample order.
    pub evaluations: Vec<SampleEvaluation>,
    /// Scores came from the model itself rather than from a metric.
    pub precomputed: bool,
}

/// Single-pass accumulator of prediction records against a plan. Records may
/// arrive in any order; each is scored as soon as it is pushed.
pub struct PredictionSink<'a> {
    plan: &'a PermutationPlan,
    labels: &'a HashMap<String, LabelSpec>,
    metric: Metric,
    index: HashMap<u64, usize>,
    scores: Vec<Option<f64>>,
}

impl<'a> PredictionSink<'a> {
    pub fn new(plan: &'a PermutationPlan, labels: &'a HashMap<String, LabelSpec>, metric: Metric) -> Result<Self> {
        if metric != Metric::Precomputed {
            if let Some(id) = plan.sample_ids.iter().find(|id| !labels.contains_key(*id)) {
                return Err(Error::Invalid(format!("no test label for planned sample `{id}`")));
            }
        }
        let index = plan.tasks.iter().enumerate().map(|(i, t)| (t.task_id, i)).collect();
        Ok(Self {
            plan,
            labels,
            metric,
            index,
            scores: vec![None; plan.tasks.len()],
        })
    }

    pub fn push(&mut self, record: PredictionRecord) -> Result<()> {
        let task_id = record.task_id;
        let &i = self
            .index
            .get(&task_id)
            .ok_or_else(|| Error::Invalid(format!("task_id {task_id} is not in the plan")))?;
        if self.scores[i].is_some() {
            return Err(Error::DuplicateTask(task_id));
        }
        let mismatch = |reason: String| Error::PredictionMismatch { task_id, reason };
        let score = match (self.metric, record.prediction, record.score) {
            (Metric::Precomputed, None, Some(s)) if (0.0..=1.0).contains(&s) => s,
            (Metric::Precomputed, None, Some(s)) => return Err(mismatch(format!("score {s} outside [0, 1]"))),
            (Metric::Precomputed, _, _) => return Err(mismatch("expected a `score` field only".into())),
            (metric, Some(prediction), None) => {
                let label = &self.labels[&self.plan.tasks[i].sample_id];
                metric.score(&prediction, label).map_err(mismatch)?
            }
            (_, _, _) => return Err(mismatch("expected a `prediction` field only".into())),
        };
        self.scores[i] = Some(score);
        Ok(())
    }

    pub fn finish(self) -> Result<Ingested> {
        let missing: Vec<u64> = self
            .scores
            .iter()
            .zip(&self.plan.tasks)
            .filter(|(s, _)| s.is_none())
            .map(|(_, t)| t.task_id)
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingPredictions { task_ids: missing });
        }

        let position: HashMap<&str, usize> = self
            .plan
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut evaluations: Vec<SampleEvaluation> = self
            .plan
            .sample_ids
            .iter()
            .map(|id| SampleEvaluation::new(id.clone(), f64::NAN))
            .collect();
        for (task, score) in self.plan.tasks.iter().zip(self.scores) {
            let score = score.expect("checked above");
            let eval = &mut evaluations[position[task.sample_id.as_str()]];
            match task.kind {
                TaskKind::Clean => eval.clean_score = score,
                TaskKind::Permuted => {
                    let subset = task.subset().expect("validated plan");
                    eval.permuted.entry((subset, task.repeat)).or_default().push(score);
                }
            }
        }
        Ok(Ingested {
            evaluations,
            precomputed: self.metric == Metric::Precomputed,
        })
    }
}

/// Joins an in-memory stream of records to the plan.
pub fn assemble_evaluations(
    plan: &PermutationPlan,
    labels: &HashMap<String, LabelSpec>,
    metric: Metric,
    records: impl IntoIterator<Item = Result<PredictionRecord>>,
) -> Result<Ingested> {
    let mut sink = PredictionSink::new(plan, labels, metric)?;
    for r in records {
        sink.push(r?)?;
    }
    sink.finish()
}

/// Streams a predictions file and joins it to the plan.
pub fn ingest_predictions<R: BufRead>(
    plan: &PermutationPlan,
    labels: &HashMap<String, LabelSpec>,
    metric: Metric,
    reader: R,
) -> Result<Ingested> {
    assemble_evaluations(plan, labels, metric, read_predictions(reader))
}

/// Runs `predict` on every task (in parallel) and joins the outputs exactly
/// as a predictions file would be joined.
pub fn evaluate_in_process<F>(
    plan: &PermutationPlan,
    labels: &HashMap<String, LabelSpec>,
    metric: Metric,
    predict: F,
) -> Result<Ingested>
where
    F: Fn(&PlanTask) -> PredictionSpec + Sync,
{
    let records: Vec<PredictionRecord> = plan
        .tasks
        .par_iter()
        .map(|t| PredictionRecord::prediction(t.task_id, predict(t)))
        .collect();
    assemble_evaluations(plan, labels, metric, records.into_iter().map(Ok))
}
