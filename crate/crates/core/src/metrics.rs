//! Bounded per-sample scores that generalize the 0/1 accuracy indicator, and
//! the trivial train-split predictors used for task normalization.
//!
//! Every score lies in `[0, 1]`. Rankings order candidates by descending score
//! and break ties by ascending candidate index, here and everywhere else.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Baselines;

/// Ground truth for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpec {
    ClassLabel(String),
    Ranking(RankingLabel),
    Numeric(NumericLabel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingLabel {
    pub candidates: Vec<String>,
    pub ground_truth: usize,
    /// Dense graded relevance in `[0, 1]`, one entry per candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericLabel {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Model output for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSpec {
    ClassLabel(String),
    CandidateScores(Vec<f64>),
    Numeric(f64),
}

impl LabelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LabelSpec::ClassLabel(_) => Ok(()),
            LabelSpec::Ranking(r) => r.validate(),
            LabelSpec::Numeric(n) if !n.value.is_finite() => {
                Err(Error::Invalid(format!("numeric label {} is not finite", n.value)))
            }
            LabelSpec::Numeric(_) => Ok(()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LabelSpec::ClassLabel(_) => "class_label",
            LabelSpec::Ranking(_) => "ranking",
            LabelSpec::Numeric(_) => "numeric",
        }
    }

    pub fn as_class(&self) -> Option<&str> {
        match self {
            LabelSpec::ClassLabel(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_ranking(&self) -> Option<&RankingLabel> {
        match self {
            LabelSpec::Ranking(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            LabelSpec::Numeric(n) => Some(n.value),
            _ => None,
        }
    }
}

impl RankingLabel {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Invalid("ranking label has no candidates".into()));
        }
        if self.ground_truth >= self.candidates.len() {
            return Err(Error::Invalid(format!(
                "ground truth index {} outside {} candidates",
                self.ground_truth,
                self.candidates.len()
            )));
        }
        if let Some(rel) = &self.relevance {
            if rel.len() != self.candidates.len() {
                return Err(Error::Invalid(format!(
                    "relevance has {} entries for {} candidates",
                    rel.len(),
                    self.candidates.len()
                )));
            }
            if let Some(bad) = rel.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Invalid(format!("relevance {bad} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Dense relevance, or a one-hot vector on the ground truth when absent.
    pub fn relevance_or_one_hot(&self) -> Vec<f64> {
        match &self.relevance {
            Some(rel) => rel.clone(),
            None => {
                let mut rel = vec![0.0; self.candidates.len()];
                rel[self.ground_truth] = 1.0;
                rel
            }
        }
    }
}

/// Per-sample metric selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ExactMatch,
    Rr,
    Ndcg,
    Regression,
    /// The model scored itself; the framework cannot audit the metric.
    Precomputed,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::ExactMatch => "exact_match",
            Metric::Rr => "rr",
            Metric::Ndcg => "ndcg",
            Metric::Regression => "regression",
            Metric::Precomputed => "precomputed",
        }
    }

    /// Scores a model output against a label. `Precomputed` never reaches here.
    pub fn score(self, prediction: &PredictionSpec, label: &LabelSpec) -> std::result::Result<f64, String> {
        match (self, prediction, label) {
            (Metric::ExactMatch, PredictionSpec::ClassLabel(p), LabelSpec::ClassLabel(y)) => Ok(exact_match(p, y)),
            (Metric::Rr, PredictionSpec::CandidateScores(s), LabelSpec::Ranking(r)) => {
                check_scores(s, r)?;
                Ok(reciprocal_rank(s, r.ground_truth))
            }
            (Metric::Ndcg, PredictionSpec::CandidateScores(s), LabelSpec::Ranking(r)) => {
                check_scores(s, r)?;
                Ok(ndcg(s, &r.relevance_or_one_hot()))
            }
            (Metric::Regression, PredictionSpec::Numeric(p), LabelSpec::Numeric(y)) => {
                if !p.is_finite() {
                    return Err(format!("numeric prediction {p} is not finite"));
                }
                Ok(regression_score(*p, y.value))
            }
            (Metric::Precomputed, _, _) => Err("metric `precomputed` expects `score` records".into()),
            (m, p, l) => Err(format!(
                "metric `{}` cannot score a {} prediction against a {} label",
                m.name(),
                prediction_kind(p),
                l.kind()
            )),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact_match" => Metric::ExactMatch,
            "rr" | "mrr" => Metric::Rr,
            "ndcg" => Metric::Ndcg,
            "regression" => Metric::Regression,
            "precomputed" => Metric::Precomputed,
            other => return Err(Error::Invalid(format!("unknown metric `{other}`"))),
        })
    }
}

fn prediction_kind(p: &PredictionSpec) -> &'static str {
    match p {
        PredictionSpec::ClassLabel(_) => "class_label",
        PredictionSpec::CandidateScores(_) => "candidate_scores",
        PredictionSpec::Numeric(_) => "numeric",
    }
}

fn check_scores(scores: &[f64], label: &RankingLabel) -> std::result::Result<(), String> {
    if scores.len() != label.candidates.len() {
        return Err(format!(
            "{} candidate scores for {} candidates",
            scores.len(),
            label.candidates.len()
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err("candidate scores must be finite".into());
    }
    Ok(())
}

pub fn exact_match(prediction: &str, label: &str) -> f64 {
    if prediction == label {
        1.0
    } else {
        0.0
    }
}

/// Candidate indices by descending score, ties by ascending index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].partial_cmp(&scores[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    order
}

/// `1 / rank` of the ground truth.
pub fn reciprocal_rank(scores: &[f64], ground_truth: usize) -> f64 {
    let gt = scores[ground_truth];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > gt || (s == gt && j < ground_truth))
        .count();
    1.0 / (ahead + 1) as f64
}

/// Normalized discounted cumulative gain with linear gain and a `log2(i + 1)`
/// discount over all positions. Returns 0 when no candidate is relevant.
pub fn ndcg(scores: &[f64], relevance: &[f64]) -> f64 {
    debug_assert_eq!(scores.len(), relevance.len());
    let dcg: f64 = rank_order(scores)
        .iter()
        .enumerate()
        .map(|(i, &c)| relevance[c] / discount(i))
        .sum();
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().enumerate().map(|(i, r)| r / discount(i)).sum();
    if idcg <= 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

fn discount(zero_based_position: usize) -> f64 {
    ((zero_based_position + 2) as f64).log2()
}

/// `max(0, 1 - |pred - label| / max(label, 1))`: the dataset mean equals
/// `1 - MAPE` whenever no sample hits the floor or the label guard.
pub fn regression_score(prediction: f64, label: f64) -> f64 {
    (1.0 - (prediction - label).abs() / label.max(1.0)).max(0.0)
}

/// Most frequent class; ties go to the smallest label.
pub fn majority_class<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // BTreeMap iterates ascending, so keeping strictly larger counts keeps the
    // smallest label among ties.
    let mut best: Option<(&str, usize)> = None;
    for (label, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l)
}

/// Test-split accuracy of always predicting the train majority class.
pub fn majority_vote_baseline(train: &[&str], test: &[&str]) -> Result<f64> {
    let majority = majority_class(train.iter().copied()).ok_or(Error::EmptyTrain(None))?;
    mean_of(test.iter().map(|y| exact_match(majority, y)))
}

/// Ground-truth answer counts over a train split.
pub fn answer_frequencies(train: &[&RankingLabel]) -> HashMap<String, usize> {
    let mut freq = HashMap::new();
    for r in train {
        *freq.entry(r.candidates[r.ground_truth].clone()).or_default() += 1;
    }
    freq
}

/// Test-split score of ranking candidates by their train answer frequency.
/// Candidates absent from the table have frequency 0.
pub fn majority_ranking_baseline(
    frequencies: &HashMap<String, usize>,
    test: &[&RankingLabel],
    metric: Metric,
) -> Result<f64> {
    let scored = test.iter().map(|item| {
        let scores: Vec<f64> = item
            .candidates
            .iter()
            .map(|c| frequencies.get(c).copied().unwrap_or(0) as f64)
            .collect();
        match metric {
            Metric::Ndcg => Ok(ndcg(&scores, &item.relevance_or_one_hot())),
            Metric::Rr => Ok(reciprocal_rank(&scores, item.ground_truth)),
            other => Err(Error::Invalid(format!(
                "majority ranking baseline needs rr or ndcg, got {other}"
            ))),
        }
    });
    let scores = scored.collect::<Result<Vec<_>>>()?;
    mean_of(scores.into_iter())
}

/// Middle value; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Test-split mean `regression_score` of the constant train-median predictor.
pub fn constant_regression_baseline(train: &[f64], test: &[f64]) -> Result<f64> {
    let constant = median(train).ok_or(Error::EmptyTrain(None))?;
    mean_of(test.iter().map(|&y| regression_score(constant, y)))
}

fn mean_of(scores: impl Iterator<Item = f64>) -> Result<f64> {
    let (sum, n) = scores.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        return Err(Error::Invalid("empty test split".into()));
    }
    Ok(sum / n as f64)
}

/// Applies a baseline predictor to the whole split and to each test group.
///
/// Items are `(group, label)` pairs. Every group seen in the test split needs
/// at least one train item.
pub fn grouped_baselines<T>(
    train: &[(Option<&str>, T)],
    test: &[(Option<&str>, T)],
    baseline: impl Fn(&[&T], &[&T]) -> Result<f64>,
) -> Result<Baselines>
where
    T: Sized,
{
    let all_train: Vec<&T> = train.iter().map(|(_, t)| t).collect();
    let all_test: Vec<&T> = test.iter().map(|(_, t)| t).collect();
    let majority_fraction = baseline(&all_train, &all_test)?;

    let mut per_group = BTreeMap::new();
    let groups: std::collections::BTreeSet<&str> = test.iter().filter_map(|(g, _)| *g).collect();
    for g in groups {
        let tr: Vec<&T> = train.iter().filter(|(k, _)| *k == Some(g)).map(|(_, t)| t).collect();
        if tr.is_empty() {
            return Err(Error::EmptyTrain(Some(g.to_string())));
        }
        let te: Vec<&T> = test.iter().filter(|(k, _)| *k == Some(g)).map(|(_, t)| t).collect();
        per_group.insert(g.to_string(), baseline(&tr, &te)?);
    }
    Ok(Baselines {
        majority_fraction,
        per_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(n: usize, gt: usize) -> RankingLabel {
        RankingLabel {
            candidates: (0..n).map(|i| format!("c{i}")).collect(),
            ground_truth: gt,
            relevance: None,
        }
    }

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match("yes", "yes"), 1.0);
        assert_eq!(exact_match("yes", "no"), 0.0);
        // 8-sample fixture, 5 matches counted by hand
        let preds = ["a", "b", "a", "c", "a", "b", "b", "c"];
        let labels = ["a", "b", "b", "c", "a", "a", "b", "a"];
        let mean = preds.iter().zip(labels).map(|(p, y)| exact_match(p, y)).sum::<f64>() / 8.0;
        assert_eq!(mean, 0.625);
    }

    #[test]
    fn reciprocal_rank_cases() {
        assert_eq!(reciprocal_rank(&[0.1, 0.9, 0.3], 1), 1.0);
        let mut scores: Vec<f64> = (0..100).map(|i| -(i as f64)).collect();
        scores.swap(0, 3);
        // candidate 0 now sits where index 3 was: three candidates outrank it
        assert_eq!(reciprocal_rank(&scores, 0), 0.25);
        // all tied, ground truth at index 2: indices 0 and 1 precede it
        assert!((reciprocal_rank(&[0.5; 5], 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ndcg_cases() {
        assert_eq!(ndcg(&[3.0, 2.0, 1.0], &[1.0, 0.5, 0.0]), 1.0);
        assert!((ndcg(&[3.0, 2.0, 1.0], &[0.0, 0.0, 1.0]) - 0.5).abs() < 1e-15);
        // predicted order (2nd, 1st, 3rd)
        let got = ndcg(&[2.0, 3.0, 1.0], &[1.0, 0.5, 0.0]);
        let l3 = 3f64.log2();
        let want = (0.5 + 1.0 / l3) / (1.0 + 0.5 / l3);
        assert!((got - want).abs() < 1e-15);
        assert_eq!(ndcg(&[1.0, 2.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn regression_cases() {
        assert!((regression_score(110.0, 100.0) - 0.9).abs() < 1e-15);
        assert_eq!(regression_score(100.0, 100.0), 1.0);
        assert_eq!(regression_score(300.0, 100.0), 0.0);
        // label 0 is guarded by max(label, 1)
        assert!((regression_score(0.5, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn majority_vote_cases() {
        let train: Vec<&str> = [["A"; 7].as_slice(), ["B"; 3].as_slice()].concat();
        let test: Vec<&str> = [["A"; 4].as_slice(), ["B"; 6].as_slice()].concat();
        assert!((majority_vote_baseline(&train, &test).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(majority_vote_baseline(&["x", "x"], &["x"]).unwrap(), 1.0);
        assert_eq!(majority_class(["b", "a", "b", "a"]), Some("a"));
        assert!(matches!(
            majority_vote_baseline(&[], &["x"]),
            Err(Error::EmptyTrain(None))
        ));
    }

    #[test]
    fn grouped_majority_pools_by_group_size() {
        // 12-sample fixture: group g1 train {y,y,n}, test {y,n,n,n}
        //                    group g2 train {n,n,y}, test {n,n,y,n}
        // by hand: g1 majority y scores 1/4, g2 majority n scores 3/4
        let train = [
            (Some("g1"), "y"),
            (Some("g1"), "y"),
            (Some("g1"), "n"),
            (Some("g2"), "n"),
            (Some("g2"), "n"),
            (Some("g2"), "y"),
        ];
        let test = [
            (Some("g1"), "y"),
            (Some("g1"), "n"),
            (Some("g1"), "n"),
            (Some("g1"), "n"),
            (Some("g2"), "n"),
            (Some("g2"), "n"),
            (Some("g2"), "y"),
            (Some("g2"), "n"),
        ];
        let b = grouped_baselines(&train, &test, |tr, te| {
            let tr: Vec<&str> = tr.iter().map(|s| **s).collect();
            let te: Vec<&str> = te.iter().map(|s| **s).collect();
            majority_vote_baseline(&tr, &te)
        })
        .unwrap();
        assert_eq!(b.per_group["g1"], 0.25);
        assert_eq!(b.per_group["g2"], 0.75);
        let pooled = (4.0 * b.per_group["g1"] + 4.0 * b.per_group["g2"]) / 8.0;
        assert_eq!(pooled, 0.5);
        // overall train: y=3, n=3, tie goes to "n"; test has 6 n of 8
        assert_eq!(b.majority_fraction, 6.0 / 8.0);
    }

    #[test]
    fn grouped_baseline_needs_group_train() {
        let train = [(Some("g1"), "y")];
        let test = [(Some("g2"), "y")];
        let err = grouped_baselines(&train, &test, |tr, te| {
            let tr: Vec<&str> = tr.iter().map(|s| **s).collect();
            let te: Vec<&str> = te.iter().map(|s| **s).collect();
            majority_vote_baseline(&tr, &te)
        })
        .unwrap_err();
        assert!(matches!(err, Error::EmptyTrain(Some(g)) if g == "g2"));
    }

    #[test]
    fn majority_ranking_cases() {
        let item = |cands: &[&str], gt| RankingLabel {
            candidates: cands.iter().map(|c| c.to_string()).collect(),
            ground_truth: gt,
            relevance: None,
        };
        let train = [
            item(&["cat", "dog"], 0),
            item(&["cat", "cow"], 0),
            item(&["dog", "cow"], 0),
        ];
        let freq = answer_frequencies(&train.iter().collect::<Vec<_>>());
        assert_eq!(freq["cat"], 2);

        let all_cat = [item(&["dog", "cat", "cow"], 1)];
        let refs: Vec<&RankingLabel> = all_cat.iter().collect();
        assert_eq!(majority_ranking_baseline(&freq, &refs, Metric::Rr).unwrap(), 1.0);

        // uniform (all unknown) frequencies: order is by index
        let unknown = ranking(4, 3);
        assert_eq!(
            majority_ranking_baseline(&HashMap::new(), &[&unknown], Metric::Rr).unwrap(),
            0.25
        );

        // 3-sample fixture by hand: cat=2, dog=1, cow=0
        //   [cow, dog, cat] gt cow -> order cat, dog, cow -> rr 1/3
        //   [dog, cow] gt dog     -> order dog, cow      -> rr 1
        //   [cow, bird] gt bird   -> tie 0,0, bird index 1 -> rr 1/2
        let fixture = [
            item(&["cow", "dog", "cat"], 0),
            item(&["dog", "cow"], 0),
            item(&["cow", "bird"], 1),
        ];
        let refs: Vec<&RankingLabel> = fixture.iter().collect();
        let got = majority_ranking_baseline(&freq, &refs, Metric::Rr).unwrap();
        assert!((got - (1.0 / 3.0 + 1.0 + 0.5) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_regression_cases() {
        assert_eq!(median(&[1.0, 2.0, 9.0]), Some(2.0));
        assert_eq!(
            constant_regression_baseline(&[10.0, 10.0, 10.0], &[10.0, 10.0]).unwrap(),
            1.0
        );
        // 5-sample fixture: train median 20; scores 1, 0.5, 0.75, 0.8, 0 by hand
        let test = [20.0, 40.0, 16.0, 25.0, 5.0];
        let by_hand = (1.0 + 0.5 + 0.75 + 0.8 + 0.0) / 5.0;
        let got = constant_regression_baseline(&[10.0, 20.0, 30.0], &test).unwrap();
        assert!((got - by_hand).abs() < 1e-15);
    }

    #[test]
    fn metric_rejects_mismatched_variants() {
        let label = LabelSpec::ClassLabel("yes".into());
        let pred = PredictionSpec::Numeric(1.0);
        assert!(Metric::ExactMatch.score(&pred, &label).is_err());
        let r = LabelSpec::Ranking(ranking(3, 0));
        assert!(Metric::Rr
            .score(&PredictionSpec::CandidateScores(vec![1.0]), &r)
            .is_err());
    }

    #[test]
    fn label_validation() {
        assert!(LabelSpec::Ranking(ranking(3, 3)).validate().is_err());
        let mut r = ranking(2, 0);
        r.relevance = Some(vec![1.0]);
        assert!(r.validate().is_err());
        r.relevance = Some(vec![1.0, 1.5]);
        assert!(r.validate().is_err());
        let n = LabelSpec::Numeric(NumericLabel {
            value: f64::NAN,
            unit: None,
        });
        assert!(n.validate().is_err());
    }

    #[test]
    fn label_json_shape() {
        let l: LabelSpec = serde_json::from_str(r#"{"class_label":"yes"}"#).unwrap();
        assert_eq!(l.as_class(), Some("yes"));
        let l: LabelSpec =
            serde_json::from_str(r#"{"ranking":{"candidates":["a","b"],"ground_truth":1,"relevance":[0.0,1.0]}}"#)
                .unwrap();
        assert_eq!(l.as_ranking().unwrap().ground_truth, 1);
        let l: LabelSpec = serde_json::from_str(r#"{"numeric":{"value":12,"unit":"persons"}}"#).unwrap();
        assert_eq!(l.as_numeric(), Some(12.0));
    }
}
