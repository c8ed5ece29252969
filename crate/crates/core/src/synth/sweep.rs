//! Variance sweep over the informativeness of block `c`, producing the
//! accuracy and perceptual-score table for each model class.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{majority_vote_baseline, LabelSpec, Metric, PredictionSpec};
use crate::modality::{ModalityId, ModalitySet};
use crate::plan::build_plan;
use crate::protocol::evaluate_in_process;
use crate::score::{dataset_perceptual_score, Baselines, Mode, RunConfig, ScoreTriple};
use crate::stats::{mean, MeanStd};

use super::data::{generate_dataset, SyntheticConfig, SyntheticDataset};
use super::model::{accuracy, train_logistic, train_mlp, BlockScorer, Projected, TrainConfig};

/// Modality names of the three blocks.
pub const BLOCKS: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template; `var_c` and `seed` are set per grid point.
    pub data: SyntheticConfig,
    pub grid: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub train: TrainConfig,
    pub permutations: u32,
    pub repeats: u32,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            data: SyntheticConfig::default(),
            grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            models: vec![ModelKind::Logistic, ModelKind::Mlp],
            train: TrainConfig::default(),
            permutations: 20,
            repeats: 10,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockScores {
    pub raw: MeanStd,
    pub task_normalized: MeanStd,
    pub model_normalized: MeanStd,
}

impl From<&ScoreTriple> for BlockScores {
    fn from(t: &ScoreTriple) -> Self {
        Self {
            raw: t.raw,
            task_normalized: t.task_normalized_unclipped,
            model_normalized: t.model_normalized,
        }
    }
}

/// One table row; percentages. `seed` is `None` for seed-averaged rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub var_c: f64,
    pub seed: Option<u64>,
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub majority: f64,
    pub blocks: [BlockScores; 3],
}

/// Test accuracy, majority baseline and the perceptual scores of the three
/// blocks for an already trained model.
pub fn evaluate_model(
    data: &SyntheticDataset,
    model: &Projected,
    permutations: u32,
    repeats: u32,
    seed: u64,
) -> Result<(f64, f64, [ScoreTriple; 3])> {
    let ids: Vec<String> = (0..data.test.len()).map(|i| format!("t{i:05}")).collect();
    let position: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let class = |y: bool| if y { "1" } else { "0" };
    let labels: HashMap<String, LabelSpec> = ids
        .iter()
        .zip(&data.test)
        .map(|(id, p)| (id.clone(), LabelSpec::ClassLabel(class(p.label).into())))
        .collect();

    let blocks: Vec<ModalityId> = BLOCKS
        .iter()
        .map(|b| ModalityId::new(*b).expect("static name"))
        .collect();
    let subsets: Vec<ModalitySet> = blocks.iter().cloned().map(ModalitySet::single).collect();
    let config = RunConfig {
        permutations,
        repeats,
        master_seed: seed,
        exclude_self: false,
        clip_task_norm: false,
        mode: Mode::MonteCarlo,
    };
    let plan = build_plan(&ids, &subsets, &config)?;
    let ingested = evaluate_in_process(&plan, &labels, Metric::ExactMatch, |task| {
        let mut s = [0.0; 3];
        for (k, m) in blocks.iter().enumerate() {
            s[k] = data.test[position[task.source_of(m)]].scalars()[k];
        }
        PredictionSpec::ClassLabel(class(model.predict(s)).into())
    })?;

    let train: Vec<&str> = data.train.iter().map(|p| class(p.label)).collect();
    let test: Vec<&str> = data.test.iter().map(|p| class(p.label)).collect();
    let baselines = Baselines::new(majority_vote_baseline(&train, &test)?);

    let mut scores = Vec::with_capacity(3);
    for subset in &subsets {
        scores.push(dataset_perceptual_score(
            &ingested.evaluations,
            subset,
            &baselines,
            &config,
        )?);
    }
    let scores: [ScoreTriple; 3] = scores.try_into().expect("three blocks");
    Ok((
        accuracy(model, &data.test) * 100.0,
        baselines.majority_fraction * 100.0,
        scores,
    ))
}

fn run_point(config: &SweepConfig, seed: u64, var_c: f64) -> Result<Vec<SweepRow>> {
    let data = generate_dataset(&SyntheticConfig {
        var_c,
        seed,
        ..config.data.clone()
    })?;
    let train = TrainConfig {
        seed,
        ..config.train.clone()
    };
    config
        .models
        .iter()
        .map(|&kind| {
            let (projected, summary) = match kind {
                ModelKind::Logistic => {
                    let (m, s) = train_logistic(&data, &train)?;
                    (m.project(&data.layout), s)
                }
                ModelKind::Mlp => {
                    let (m, s) = train_mlp(&data, &train)?;
                    (m.project(&data.layout), s)
                }
            };
            let (acc, majority, scores) = evaluate_model(&data, &projected, config.permutations, config.repeats, seed)?;
            log::info!(
                "{} var_c={var_c:.2} seed={seed}: acc {acc:.1}, epochs {}",
                kind.name(),
                summary.epochs
            );
            Ok(SweepRow {
                model: kind,
                var_c,
                seed: Some(seed),
                accuracy: acc,
                train_accuracy: summary.train_accuracy * 100.0,
                majority,
                blocks: [0, 1, 2].map(|k| BlockScores::from(&scores[k])),
            })
        })
        .collect()
}

/// Trains and scores every model at every grid point for every seed. Rows are
/// ordered by model, variance, then seed.
pub fn run_variance_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if config.grid.is_empty() || config.models.is_empty() || config.seeds.is_empty() {
        return Err(Error::Invalid("sweep needs a grid, a model and a seed".into()));
    }
    if let Some(v) = config.grid.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Invalid(format!(
            "variance {v} is not a finite non-negative value"
        )));
    }
    let jobs: Vec<(u64, f64)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.grid.iter().map(move |&v| (s, v)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(seed, var_c)| run_point(config, seed, var_c))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let grid_pos = |v: f64| config.grid.iter().position(|g| *g == v).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.model
            .cmp(&b.model)
            .then(grid_pos(a.var_c).cmp(&grid_pos(b.var_c)))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

/// Averages rows sharing `(model, var_c)`; standard deviations are averaged
/// as well.
pub fn average_over_seeds(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut keys: Vec<(ModelKind, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, v)| *m == r.model && *v == r.var_c) {
            keys.push((r.model, r.var_c));
        }
    }
    keys.into_iter()
        .map(|(model, var_c)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.model == model && r.var_c == var_c).collect();
            let avg = |f: &dyn Fn(&SweepRow) -> f64| mean(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let avg_ms = |f: &dyn Fn(&SweepRow) -> MeanStd| MeanStd {
                mean: avg(&|r| f(r).mean),
                std: avg(&|r| f(r).std),
            };
            SweepRow {
                model,
                var_c,
                seed: None,
                accuracy: avg(&|r| r.accuracy),
                train_accuracy: avg(&|r| r.train_accuracy),
                majority: avg(&|r| r.majority),
                blocks: [0, 1, 2].map(|k| BlockScores {
                    raw: avg_ms(&|r| r.blocks[k].raw),
                    task_normalized: avg_ms(&|r| r.blocks[k].task_normalized),
                    model_normalized: avg_ms(&|r| r.blocks[k].model_normalized),
                }),
            }
        })
        .collect()
}

/// One line per row, columns in table order.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("model,var_c,seed,acc");
    for b in BLOCKS {
        let _ = write!(out, ",P_{b},P_{b}_std,P_{b}_task_norm,P_{b}_model_norm");
    }
    out.push_str(",majority\n");
    for r in rows {
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{},{:.2}", r.model.name(), r.var_c, seed, r.accuracy);
        for b in &r.blocks {
            let _ = write!(
                out,
                ",{:.2},{:.2},{:.2},{:.2}",
                b.raw.mean, b.raw.std, b.task_normalized.mean, b.model_normalized.mean
            );
        }
        let _ = writeln!(out, ",{:.2}", r.majority);
    }
    out
}

pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut header = vec!["model".to_string(), "var_c".into(), "acc".into()];
    for b in BLOCKS {
        header.extend([format!("P_{b}"), format!("P_{b}/Z_D"), format!("P_{b}/Z_Df")]);
    }
    header.push("majority".into());
    let mut table = vec![header];
    for r in rows {
        let mut cells = vec![
            r.model.name().to_string(),
            format!("{}", r.var_c),
            format!("{:.1}", r.accuracy),
        ];
        for b in &r.blocks {
            cells.push(format!("{:.2} ± {:.2}", b.raw.mean, b.raw.std));
            cells.push(format!("{:.2}", b.task_normalized.mean));
            cells.push(format!("{:.2}", b.model_normalized.mean));
        }
        cells.push(format!("{:.1}", r.majority));
        table.push(cells);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &table {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let pad = " ".repeat(widths[c] - v.chars().count());
                if c == 0 {
                    format!("{v}{pad}")
                } else {
                    format!("{pad}{v}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  "));
    }
    out
}
