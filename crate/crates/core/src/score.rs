//! Score algebra: per-sample permuted scores, sample perceptual scores, and the
//! normalized dataset scores with their repeat statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::ModalitySet;
use crate::stats::{mean, MeanStd};

/// Rendered task-normalized scores never exceed this value when clipping is on.
pub const TASK_NORM_CLIP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `permutations` donors drawn uniformly with replacement per repeat.
    MonteCarlo,
    /// Every test sample used once as donor; repeats are identical.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub permutations: u32,
    pub repeats: u32,
    pub master_seed: u64,
    pub exclude_self: bool,
    pub clip_task_norm: bool,
    pub mode: Mode,
}

impl Default for RunConfig {
    /// Five donors per sample, five repeats.
    fn default() -> Self {
        Self {
            permutations: 5,
            repeats: 5,
            master_seed: 0,
            exclude_self: false,
            clip_task_norm: true,
            mode: Mode::MonteCarlo,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::Invalid("permutations per sample must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Invalid("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Score of the trivial train-split predictor on the test split, overall and
/// per group. Fractions in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub majority_fraction: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_group: BTreeMap<String, f64>,
}

impl Baselines {
    pub fn new(majority_fraction: f64) -> Self {
        Self {
            majority_fraction,
            per_group: BTreeMap::new(),
        }
    }
}

/// Per-sample scores for one test item: the clean score and, for every
/// `(subset, repeat)`, one score per donor slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvaluation {
    pub sample_id: String,
    pub clean_score: f64,
    pub permuted: BTreeMap<(ModalitySet, u32), Vec<f64>>,
}

impl SampleEvaluation {
    pub fn new(sample_id: impl Into<String>, clean_score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            clean_score,
            permuted: BTreeMap::new(),
        }
    }

    pub fn with_slots(mut self, subset: &ModalitySet, repeat: u32, slots: Vec<f64>) -> Self {
        self.permuted.insert((subset.clone(), repeat), slots);
        self
    }

    fn slots(&self, subset: &ModalitySet, repeat: u32) -> Result<&[f64]> {
        // BTreeMap lookup needs an owned tuple key
        match self.permuted.get(&(subset.clone(), repeat)) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(Error::IncompleteEvaluation {
                sample_id: self.sample_id.clone(),
                subset: format!("{subset} (repeat {repeat})"),
            }),
        }
    }
}

/// Mean score over the donor slots of one `(subset, repeat)`.
pub fn permuted_modality_score(eval: &SampleEvaluation, subset: &ModalitySet, repeat: u32) -> Result<f64> {
    Ok(mean(eval.slots(subset, repeat)?))
}

/// Clean score minus permuted score; negative when the modality irritates the
/// model.
pub fn sample_perceptual_score(eval: &SampleEvaluation, subset: &ModalitySet, repeat: u32) -> Result<f64> {
    Ok(eval.clean_score - permuted_modality_score(eval, subset, repeat)?)
}

/// Per-repeat values in percentage points. `task_normalized` is unclipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSeries {
    pub raw: Vec<f64>,
    pub task_normalized: Vec<f64>,
    pub model_normalized: Vec<f64>,
}

/// Dataset scores for one modality subset, in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub samples: usize,
    /// Mean clean score, the model normalizer.
    pub clean: f64,
    /// Mean permuted score per repeat, summarized.
    pub permuted: MeanStd,
    pub majority: f64,
    pub raw: MeanStd,
    /// Clipped at 100 per repeat when clipping is on.
    pub task_normalized: MeanStd,
    pub task_normalized_unclipped: MeanStd,
    pub model_normalized: MeanStd,
    /// At least one repeat was clipped.
    pub clipped: bool,
    pub series: RepeatSeries,
}

/// Raw, task-normalized and model-normalized dataset scores for `subset`,
/// with mean and sample standard deviation over the configured repeats.
pub fn dataset_perceptual_score(
    evals: &[SampleEvaluation],
    subset: &ModalitySet,
    baselines: &Baselines,
    config: &RunConfig,
) -> Result<ScoreTriple> {
    score_with_majority(evals, subset, baselines.majority_fraction, config)
}

fn score_with_majority(
    evals: &[SampleEvaluation],
    subset: &ModalitySet,
    majority_fraction: f64,
    config: &RunConfig,
) -> Result<ScoreTriple> {
    config.validate()?;
    if evals.is_empty() {
        return Err(Error::Invalid("no samples to score".into()));
    }
    if !(0.0..=1.0).contains(&majority_fraction) {
        return Err(Error::Invalid(format!(
            "majority baseline {majority_fraction} outside [0, 1]"
        )));
    }
    if majority_fraction >= 1.0 {
        return Err(Error::TaskNormalizationUndefined);
    }

    let ordered = ascending(evals);
    let repeats = config.repeats;

    // Row-major [sample][repeat] so the reduction below sums in a fixed order
    // whatever the thread count.
    let permuted: Vec<Vec<f64>> = ordered
        .par_iter()
        .map(|e| {
            (1..=repeats)
                .map(|r| permuted_modality_score(e, subset, r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let n = ordered.len() as f64;
    let clean_mean = ordered.iter().map(|e| e.clean_score).sum::<f64>() / n;
    if clean_mean <= 0.0 {
        return Err(Error::ModelNormalizationUndefined);
    }

    let mut raw = Vec::with_capacity(repeats as usize);
    let mut permuted_means = Vec::with_capacity(repeats as usize);
    for r in 0..repeats as usize {
        let mut diff = 0.0;
        let mut perm = 0.0;
        for (e, p) in ordered.iter().zip(&permuted) {
            diff += e.clean_score - p[r];
            perm += p[r];
        }
        raw.push(diff / n * 100.0);
        permuted_means.push(perm / n * 100.0);
    }

    let task_gap = 1.0 - majority_fraction;
    let task_unclipped: Vec<f64> = raw.iter().map(|r| r / task_gap).collect();
    let model: Vec<f64> = raw.iter().map(|r| r / clean_mean).collect();
    let (task, clipped) = if config.clip_task_norm {
        let clipped = task_unclipped.iter().any(|&t| t > TASK_NORM_CLIP);
        (task_unclipped.iter().map(|t| t.min(TASK_NORM_CLIP)).collect(), clipped)
    } else {
        (task_unclipped.clone(), false)
    };

    Ok(ScoreTriple {
        samples: ordered.len(),
        clean: clean_mean * 100.0,
        permuted: MeanStd::of(&permuted_means),
        majority: majority_fraction * 100.0,
        raw: MeanStd::of(&raw),
        task_normalized: MeanStd::of(&task),
        task_normalized_unclipped: MeanStd::of(&task_unclipped),
        model_normalized: MeanStd::of(&model),
        clipped,
        series: RepeatSeries {
            raw,
            task_normalized: task_unclipped,
            model_normalized: model,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupBreakdown {
    pub groups: BTreeMap<String, ScoreTriple>,
    pub warnings: Vec<String>,
}

/// Dataset scores restricted to each group, normalized by that group's own
/// majority baseline.
pub fn group_breakdown(
    evals: &[SampleEvaluation],
    subset: &ModalitySet,
    group_of: &BTreeMap<String, String>,
    baselines: &Baselines,
    config: &RunConfig,
) -> Result<GroupBreakdown> {
    let mut members: BTreeMap<&str, Vec<SampleEvaluation>> = BTreeMap::new();
    for e in evals {
        let g = group_of
            .get(&e.sample_id)
            .ok_or_else(|| Error::MissingGroup(e.sample_id.clone()))?;
        members.entry(g.as_str()).or_default().push(e.clone());
    }

    let mut warnings = Vec::new();
    for g in baselines.per_group.keys() {
        if !members.contains_key(g.as_str()) {
            warnings.push(format!("group `{g}` has no test samples; omitted"));
        }
    }

    let mut groups = BTreeMap::new();
    for (g, group_evals) in members {
        let majority = *baselines
            .per_group
            .get(g)
            .ok_or_else(|| Error::MissingBaseline(g.to_string()))?;
        groups.insert(
            g.to_string(),
            score_with_majority(&group_evals, subset, majority, config)?,
        );
    }
    Ok(GroupBreakdown { groups, warnings })
}

/// Sample perceptual score averaged over repeats, one per sample in ascending
/// sample_id order.
pub fn sample_scores(evals: &[SampleEvaluation], subset: &ModalitySet, repeats: u32) -> Result<Vec<(String, f64)>> {
    ascending(evals)
        .into_iter()
        .map(|e| {
            let per_repeat = (1..=repeats)
                .map(|r| sample_perceptual_score(e, subset, r))
                .collect::<Result<Vec<_>>>()?;
            Ok((e.sample_id.clone(), mean(&per_repeat)))
        })
        .collect()
}

fn ascending(evals: &[SampleEvaluation]) -> Vec<&SampleEvaluation> {
    let mut v: Vec<&SampleEvaluation> = evals.iter().collect();
    v.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subset(s: &str) -> ModalitySet {
        ModalitySet::parse(s).unwrap()
    }

    fn config(repeats: u32) -> RunConfig {
        RunConfig {
            repeats,
            ..RunConfig::default()
        }
    }

    #[test]
    fn permuted_score_is_slot_mean() {
        let img = subset("image");
        let e = SampleEvaluation::new("s", 1.0).with_slots(&img, 1, vec![1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!((permuted_modality_score(&e, &img, 1).unwrap() - 0.8).abs() < 1e-15);
        let exact = SampleEvaluation::new("s", 1.0).with_slots(&img, 1, vec![1.0, 0.0, 0.0]);
        assert!((permuted_modality_score(&exact, &img, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_entry_names_sample_and_subset() {
        let img = subset("image");
        let e = SampleEvaluation::new("s7", 1.0);
        let err = permuted_modality_score(&e, &img, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s7") && msg.contains("image"), "{msg}");
        assert!(err.is_incomplete());
    }

    #[test]
    fn sample_score_sign() {
        let m = subset("m");
        let ev = |clean, slots| SampleEvaluation::new("s", clean).with_slots(&m, 1, slots);
        assert_eq!(sample_perceptual_score(&ev(1.0, vec![0.0; 5]), &m, 1).unwrap(), 1.0);
        assert_eq!(sample_perceptual_score(&ev(0.62, vec![0.62; 3]), &m, 1).unwrap(), 0.0);
        let neg = sample_perceptual_score(&ev(0.0, vec![0.4; 5]), &m, 1).unwrap();
        assert!((neg + 0.4).abs() < 1e-15);
    }

    #[test]
    fn degenerate_normalizers_are_errors() {
        let m = subset("m");
        let evals = vec![SampleEvaluation::new("a", 1.0).with_slots(&m, 1, vec![0.0])];
        let err = dataset_perceptual_score(&evals, &m, &Baselines::new(1.0), &config(1)).unwrap_err();
        assert!(matches!(err, Error::TaskNormalizationUndefined));
        let zero = vec![SampleEvaluation::new("a", 0.0).with_slots(&m, 1, vec![0.0])];
        let err = dataset_perceptual_score(&zero, &m, &Baselines::new(0.5), &config(1)).unwrap_err();
        assert!(matches!(err, Error::ModelNormalizationUndefined));
    }

    #[test]
    fn over_unity_task_norm_is_clipped_but_kept() {
        let m = subset("m");
        // raw 60, majority 50%: task-normalized 120
        let evals: Vec<_> = (0..5)
            .map(|i| {
                let slot = if i < 3 { 0.0 } else { 1.0 };
                SampleEvaluation::new(format!("s{i}"), 1.0)
                    .with_slots(&m, 1, vec![slot])
                    .with_slots(&m, 2, vec![slot])
            })
            .collect();
        let t = dataset_perceptual_score(&evals, &m, &Baselines::new(0.5), &config(2)).unwrap();
        assert!((t.raw.mean - 60.0).abs() < 1e-12);
        assert_eq!(t.task_normalized.mean, 100.0);
        assert!((t.task_normalized_unclipped.mean - 120.0).abs() < 1e-12);
        assert!(t.clipped);

        let off = RunConfig {
            clip_task_norm: false,
            ..config(2)
        };
        let t = dataset_perceptual_score(&evals, &m, &Baselines::new(0.5), &off).unwrap();
        assert!(!t.clipped);
        assert!((t.task_normalized.mean - 120.0).abs() < 1e-12);
    }

    #[test]
    fn single_group_matches_dataset_score() {
        let m = subset("m");
        let evals: Vec<_> = (0..4)
            .map(|i| SampleEvaluation::new(format!("s{i}"), 1.0).with_slots(&m, 1, vec![(i % 2) as f64]))
            .collect();
        let group_of = evals.iter().map(|e| (e.sample_id.clone(), "all".to_string())).collect();
        let mut b = Baselines::new(0.25);
        b.per_group.insert("all".into(), 0.25);
        let whole = dataset_perceptual_score(&evals, &m, &b, &config(1)).unwrap();
        let split = group_breakdown(&evals, &m, &group_of, &b, &config(1)).unwrap();
        assert_eq!(split.groups["all"], whole);
        assert!(split.warnings.is_empty());
    }

    #[test]
    fn group_errors_and_warnings() {
        let m = subset("m");
        let evals = vec![SampleEvaluation::new("a", 1.0).with_slots(&m, 1, vec![0.0])];
        let mut group_of = BTreeMap::new();
        let b = Baselines::new(0.5);
        let err = group_breakdown(&evals, &m, &group_of, &b, &config(1)).unwrap_err();
        assert!(matches!(err, Error::MissingGroup(_)));

        group_of.insert("a".to_string(), "g".to_string());
        let err = group_breakdown(&evals, &m, &group_of, &b, &config(1)).unwrap_err();
        assert!(matches!(err, Error::MissingBaseline(g) if g == "g"));

        let mut b = Baselines::new(0.5);
        b.per_group.insert("g".into(), 0.5);
        b.per_group.insert("empty".into(), 0.5);
        let out = group_breakdown(&evals, &m, &group_of, &b, &config(1)).unwrap();
        assert_eq!(out.groups.len(), 1);
        assert_eq!(out.warnings.len(), 1);
    }
}
