use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    answer_frequencies, constant_regression_baseline, grouped_baselines, majority_ranking_baseline,
    majority_vote_baseline, LabelSpec, Metric, RankingLabel,
};
use crate::modality::{ModalityId, ModalitySet};
use crate::score::{
    dataset_perceptual_score, group_breakdown, sample_scores, Baselines, RunConfig, SampleEvaluation, ScoreTriple,
    TASK_NORM_CLIP,
};
use crate::stats::MeanStd;

use super::records::{SampleRecord, Split, REPORT_SCHEMA, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Sample perceptual score averaged over repeats, as a fraction.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: ModalitySet,
    /// Several modalities replaced from one donor.
    pub joint: bool,
    pub scores: ScoreTriple,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, ScoreTriple>,
    /// Ascending by score, ties by sample_id.
    pub samples: Vec<SampleScore>,
}

/// Machine form of a scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema: String,
    pub version: u32,
    pub config: RunConfig,
    pub metric: Metric,
    pub precomputed: bool,
    pub modalities: Vec<ModalityId>,
    pub baselines: Baselines,
    pub subsets: Vec<SubsetReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub metric: Option<Metric>,
    pub modalities: Vec<ModalityId>,
    pub subsets: Vec<ModalitySet>,
    /// sample_id to group; enables the per-group breakdown.
    pub group_of: Option<BTreeMap<String, String>>,
    pub precomputed: bool,
}

fn clip_warning(t: &ScoreTriple) -> String {
    let series = &t.series.task_normalized;
    let over = series.iter().filter(|&&v| v > TASK_NORM_CLIP).count();
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!(
        "task-normalized score clipped at 100.00 in {over} of {} repeats (unclipped mean {:.2}, max {max:.2})",
        series.len(),
        t.task_normalized_unclipped.mean
    )
}

/// Scores every planned subset, overall and per group, and collects the
/// per-sample scores used for bias mining.
pub fn score_run(
    evaluations: &[SampleEvaluation],
    baselines: &Baselines,
    config: &RunConfig,
    options: &ScoreOptions,
) -> Result<ScoreReport> {
    let mut warnings = Vec::new();
    if options.precomputed {
        warnings.push("scores were precomputed by the model; the metric is not audited".to_string());
    }
    let mut subsets = Vec::with_capacity(options.subsets.len());
    for subset in &options.subsets {
        let scores = dataset_perceptual_score(evaluations, subset, baselines, config)?;
        if subset.is_joint() {
            warnings.push(format!(
                "subset {subset}: joint removal from a single donor (extension)"
            ));
        }
        if scores.clipped {
            warnings.push(format!("subset {subset}: {}", clip_warning(&scores)));
        }

        let groups = match &options.group_of {
            Some(group_of) => {
                let breakdown = group_breakdown(evaluations, subset, group_of, baselines, config)?;
                warnings.extend(breakdown.warnings.into_iter().map(|w| format!("subset {subset}: {w}")));
                for (g, t) in &breakdown.groups {
                    if t.clipped {
                        warnings.push(format!("subset {subset}, group {g}: {}", clip_warning(t)));
                    }
                }
                breakdown.groups
            }
            None => BTreeMap::new(),
        };

        let mut samples: Vec<SampleScore> = sample_scores(evaluations, subset, config.repeats)?
            .into_iter()
            .map(|(sample_id, score)| SampleScore {
                group: options.group_of.as_ref().and_then(|g| g.get(&sample_id).cloned()),
                sample_id,
                score,
            })
            .collect();
        samples.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.sample_id.cmp(&b.sample_id)));

        subsets.push(SubsetReport {
            subset: subset.clone(),
            joint: subset.is_joint(),
            scores,
            groups,
            samples,
        });
    }
    Ok(ScoreReport {
        schema: REPORT_SCHEMA.to_string(),
        version: SCHEMA_VERSION,
        config: config.clone(),
        metric: options.metric.unwrap_or(Metric::Precomputed),
        precomputed: options.precomputed,
        modalities: options.modalities.clone(),
        baselines: baselines.clone(),
        subsets,
        warnings,
    })
}

/// Baselines from the train split scored on the test split. With `group_by`,
/// each group gets its own baseline. The precomputed metric cannot be
/// audited, so its baseline must be supplied.
pub fn compute_baselines(
    samples: &[SampleRecord],
    metric: Metric,
    group_by: Option<&str>,
    supplied: Option<f64>,
) -> Result<Baselines> {
    let split = |s: Split| -> Vec<(Option<String>, &LabelSpec)> {
        samples
            .iter()
            .filter(|r| r.split == s)
            .map(|r| (group_by.and_then(|f| r.field(f)), &r.label))
            .collect()
    };
    let train = split(Split::Train);
    let test = split(Split::Test);

    if metric == Metric::Precomputed {
        let value = supplied.ok_or_else(|| Error::Invalid("precomputed metric needs an explicit baseline".into()))?;
        let mut b = Baselines::new(value);
        for (g, _) in &test {
            if let Some(g) = g {
                b.per_group.insert(g.clone(), value);
            }
        }
        return Ok(b);
    }

    fn project<'a, T>(
        items: &'a [(Option<String>, &'a LabelSpec)],
        f: impl Fn(&'a LabelSpec) -> Option<T>,
        what: &str,
    ) -> Result<Vec<(Option<&'a str>, T)>> {
        items
            .iter()
            .map(|(g, l)| {
                f(l).map(|t| (g.as_deref(), t))
                    .ok_or_else(|| Error::Invalid(format!("metric needs {what} labels, found {}", l.kind())))
            })
            .collect()
    }

    match metric {
        Metric::ExactMatch => {
            let (tr, te) = (
                project(&train, LabelSpec::as_class, "class")?,
                project(&test, LabelSpec::as_class, "class")?,
            );
            grouped_baselines(&tr, &te, |a, b| {
                let a: Vec<&str> = a.iter().map(|s| **s).collect();
                let b: Vec<&str> = b.iter().map(|s| **s).collect();
                majority_vote_baseline(&a, &b)
            })
        }
        Metric::Rr | Metric::Ndcg => {
            let (tr, te) = (
                project(&train, LabelSpec::as_ranking, "ranking")?,
                project(&test, LabelSpec::as_ranking, "ranking")?,
            );
            grouped_baselines(&tr, &te, |a: &[&&RankingLabel], b: &[&&RankingLabel]| {
                if a.is_empty() {
                    return Err(Error::EmptyTrain(None));
                }
                let a: Vec<&RankingLabel> = a.iter().map(|r| **r).collect();
                let b: Vec<&RankingLabel> = b.iter().map(|r| **r).collect();
                majority_ranking_baseline(&answer_frequencies(&a), &b, metric)
            })
        }
        Metric::Regression => {
            let (tr, te) = (
                project(&train, LabelSpec::as_numeric, "numeric")?,
                project(&test, LabelSpec::as_numeric, "numeric")?,
            );
            grouped_baselines(&tr, &te, |a, b| {
                let a: Vec<f64> = a.iter().map(|v| **v).collect();
                let b: Vec<f64> = b.iter().map(|v| **v).collect();
                constant_regression_baseline(&a, &b)
            })
        }
        Metric::Precomputed => unreachable!("handled above"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

/// Human table with two-decimal percentages, or the lossless JSON form.
pub fn render_report(report: &ScoreReport, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Table => Ok(render_table(report)),
    }
}

fn pm(v: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", v.mean, v.std)
}

fn row(label: &str, t: &ScoreTriple) -> Vec<String> {
    vec![
        label.to_string(),
        t.samples.to_string(),
        format!("{:.2}", t.clean),
        pm(&t.permuted),
        pm(&t.raw),
        pm(&t.task_normalized),
        pm(&t.model_normalized),
        format!("{:.2}", t.majority),
    ]
}

fn write_rows(out: &mut String, first: &str, rows: &[Vec<String>]) {
    let header: Vec<String> = [first, "n", "acc", "acc perm", "P", "P/Z_D", "P/Z_Df", "majority"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let all: Vec<&Vec<String>> = std::iter::once(&header).chain(rows).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| all.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    for r in all {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}

fn render_table(report: &ScoreReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let mode = match c.mode {
        crate::score::Mode::MonteCarlo => format!("monte_carlo, {} permutations", c.permutations),
        crate::score::Mode::Exact => "exact".to_string(),
    };
    let _ = writeln!(
        out,
        "metric {}  |  {mode}, {} repeats, seed {}{}",
        report.metric,
        c.repeats,
        c.master_seed,
        if c.exclude_self { ", self excluded" } else { "" }
    );
    let _ = writeln!(out);

    let rows: Vec<Vec<String>> = report
        .subsets
        .iter()
        .map(|s| row(&s.subset.to_string(), &s.scores))
        .collect();
    write_rows(&mut out, "subset", &rows);

    for s in report.subsets.iter().filter(|s| !s.groups.is_empty()) {
        let _ = writeln!(out);
        let _ = writeln!(out, "groups, subset {}", s.subset);
        let rows: Vec<Vec<String>> = s.groups.iter().map(|(g, t)| row(g, t)).collect();
        write_rows(&mut out, "group", &rows);
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(out);
        for w in &report.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}
