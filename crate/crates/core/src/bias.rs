//! Diagnostic tables: answer-prior shift between train, test and predictions
//! per question group, and the samples with the lowest perceptual scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{SampleRecord, SampleScore};

/// How a sample is assigned to a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupRule {
    /// Leading token of a text field; a leading bigram from the allowlist
    /// wins over the unigram.
    Token { field: String, bigrams: Vec<String> },
    /// Verbatim value of a record field.
    Field(String),
}

pub const DEFAULT_TEXT_FIELD: &str = "question";
pub const DEFAULT_BIGRAMS: &[&str] = &["is a", "is the", "is there", "are there", "is this", "are these"];

impl GroupRule {
    pub fn token() -> Self {
        GroupRule::Token {
            field: DEFAULT_TEXT_FIELD.to_string(),
            bigrams: DEFAULT_BIGRAMS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parses `token`, `token:<field>` or `field:<name>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "token" => Ok(Self::token()),
            Some(("token", f)) if !f.is_empty() => Ok(GroupRule::Token {
                field: f.to_string(),
                bigrams: DEFAULT_BIGRAMS.iter().map(|s| s.to_string()).collect(),
            }),
            Some(("field", f)) if !f.is_empty() => Ok(GroupRule::Field(f.to_string())),
            _ => Err(Error::Invalid(format!("unknown group rule `{s}`"))),
        }
    }

    pub fn group_of(&self, record: &SampleRecord) -> Option<String> {
        match self {
            GroupRule::Field(name) => record.field(name),
            GroupRule::Token { field, bigrams } => leading_key(&record.field(field)?, bigrams),
        }
    }
}

/// Lowercased, punctuation-free whitespace tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn leading_key(text: &str, bigrams: &[String]) -> Option<String> {
    let tokens = tokenize(text);
    if tokens.len() >= 2 {
        let pair = format!("{} {}", tokens[0], tokens[1]);
        if bigrams.contains(&pair) {
            return Some(pair);
        }
    }
    tokens.into_iter().next()
}

/// Class proportions of one group. Proportions are over the samples whose
/// class is tracked; `None` when a source has no such sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorShiftRow {
    pub group: String,
    pub predicted: Option<Vec<f64>>,
    pub test: Option<Vec<f64>>,
    pub train: Option<Vec<f64>>,
    pub test_count: usize,
    pub train_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorShift {
    pub classes: Vec<String>,
    pub rows: Vec<PriorShiftRow>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Tally {
    predicted: Vec<usize>,
    test: Vec<usize>,
    train: Vec<usize>,
}

fn proportions(counts: &[usize]) -> (Option<Vec<f64>>, usize) {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return (None, 0);
    }
    (Some(counts.iter().map(|&c| c as f64 / total as f64).collect()), total)
}

/// Per-group class proportions in the train labels, test labels and clean
/// test predictions. Rows are ordered by test count, largest first.
pub fn prior_shift_table(
    train: &[&SampleRecord],
    test: &[&SampleRecord],
    predictions: &HashMap<String, String>,
    rule: &GroupRule,
    classes: &[String],
) -> Result<PriorShift> {
    if classes.is_empty() {
        return Err(Error::Invalid("no tracked classes".into()));
    }
    let class_index = |c: &str| classes.iter().position(|k| k == c);
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    let mut bump = |group: String, pick: fn(&mut Tally) -> &mut Vec<usize>, class: Option<&str>| {
        let tally = tallies.entry(group).or_insert_with(|| Tally {
            predicted: vec![0; classes.len()],
            test: vec![0; classes.len()],
            train: vec![0; classes.len()],
        });
        if let Some(i) = class.and_then(class_index) {
            pick(tally)[i] += 1;
        }
    };

    for r in train {
        if let Some(g) = rule.group_of(r) {
            bump(g, |t| &mut t.train, r.label.as_class());
        }
    }
    for r in test {
        if let Some(g) = rule.group_of(r) {
            bump(g.clone(), |t| &mut t.test, r.label.as_class());
            bump(
                g,
                |t| &mut t.predicted,
                predictions.get(&r.sample_id).map(String::as_str),
            );
        }
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (group, t) in tallies {
        let (predicted, _) = proportions(&t.predicted);
        let (test, test_count) = proportions(&t.test);
        let (train, train_count) = proportions(&t.train);
        if predicted.is_none() && test.is_none() && train.is_none() {
            warnings.push(format!("group `{group}` has none of the tracked classes; omitted"));
            continue;
        }
        rows.push(PriorShiftRow {
            group,
            predicted,
            test,
            train,
            test_count,
            train_count,
        });
    }
    rows.sort_by(|a, b| b.test_count.cmp(&a.test_count).then_with(|| a.group.cmp(&b.group)));
    Ok(PriorShift {
        classes: classes.to_vec(),
        rows,
        warnings,
    })
}

impl PriorShift {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["token".to_string()];
        for source in ["predicted", "test", "train"] {
            h.extend(self.classes.iter().map(|c| format!("{source} {c}")));
        }
        h.push("#test".into());
        h.push("#train".into());
        h
    }

    fn cells(&self, r: &PriorShiftRow) -> Vec<String> {
        let mut cells = vec![r.group.clone()];
        for p in [&r.predicted, &r.test, &r.train] {
            match p {
                Some(p) => cells.extend(p.iter().map(|v| format!("{v:.2}"))),
                None => cells.extend(self.classes.iter().map(|_| "-".to_string())),
            }
        }
        cells.push(r.test_count.to_string());
        cells.push(r.train_count.to_string());
        cells
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = self.cells(r);
            cells[0] = csv_field(&cells[0]);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = self.header();
        let rows: Vec<Vec<String>> = std::iter::once(header.clone())
            .chain(self.rows.iter().map(|r| self.cells(r)))
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  "));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The `k` samples with the lowest scores, ascending, ties by sample_id.
/// Asking for more than exist returns all of them with a warning.
pub fn low_score_samples(scores: &[SampleScore], k: usize) -> (Vec<SampleScore>, Option<String>) {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.sample_id.cmp(&b.sample_id)));
    let warning = (k > sorted.len()).then(|| format!("requested {k} samples, only {} available", sorted.len()));
    sorted.truncate(k);
    (sorted, warning)
}
