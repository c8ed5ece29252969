use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::{LabelSpec, PredictionSpec};
use crate::modality::{ModalityId, ModalitySet};
use crate::plan::{PermutationPlan, PlanTask, TaskKind};
use crate::score::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const SAMPLES_SCHEMA: &str = "perceptual/samples";
pub const PLAN_SCHEMA: &str = "perceptual/plan";
pub const PREDICTIONS_SCHEMA: &str = "perceptual/predictions";
pub const REPORT_SCHEMA: &str = "perceptual/report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One line of a samples file. Unknown fields (for instance the question
/// text used by the bias probe) are kept in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub label: LabelSpec,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl SampleRecord {
    /// String value of a named field; `group` and `sample_id` included.
    pub fn field(&self, name: &str) -> Option<String> {
        match name {
            "group" => self.group.clone(),
            "sample_id" => Some(self.sample_id.clone()),
            _ => match self.extra.get(name)? {
                Value::String(s) => Some(s.clone()),
                Value::Null => None,
                other => Some(other.to_string()),
            },
        }
    }
}

/// First line of every protocol file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modalities: Option<Vec<ModalityId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<ModalitySet>>,
}

impl Header {
    pub fn new(schema: &str) -> Self {
        Self {
            schema: schema.to_string(),
            version: SCHEMA_VERSION,
            config: None,
            modalities: None,
            subsets: None,
        }
    }

    fn expect(&self, schema: &str) -> Result<()> {
        if self.schema != schema {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected schema `{schema}`, found `{}`", self.schema),
            });
        }
        if self.version != SCHEMA_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported schema version {}", self.version),
            });
        }
        Ok(())
    }
}

/// One line of a predictions file: either a model output or, in
/// precomputed mode, the model's own per-sample score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl PredictionRecord {
    pub fn prediction(task_id: u64, prediction: PredictionSpec) -> Self {
        Self {
            task_id,
            prediction: Some(prediction),
            score: None,
        }
    }

    pub fn score(task_id: u64, score: f64) -> Self {
        Self {
            task_id,
            prediction: None,
            score: Some(score),
        }
    }
}

/// Nonblank lines with their 1-based line numbers.
fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn parse_line<T: DeserializeOwned>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn is_header(text: &str) -> bool {
    serde_json::from_str::<Value>(text)
        .ok()
        .and_then(|v| v.get("schema").cloned())
        .is_some()
}

/// Reads a samples file; the header line is optional.
pub fn read_samples<R: BufRead>(reader: R) -> Result<Vec<SampleRecord>> {
    let mut out: Vec<SampleRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (k, item) in lines(reader).enumerate() {
        let (line, text) = item?;
        if k == 0 && is_header(&text) {
            parse_line::<Header>(line, &text)?.expect(SAMPLES_SCHEMA)?;
            continue;
        }
        let record: SampleRecord = parse_line(line, &text)?;
        record.label.validate().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !seen.insert((record.split, record.sample_id.clone())) {
            return Err(Error::DuplicateSample(record.sample_id));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_plan<W: Write>(plan: &PermutationPlan, mut out: W) -> Result<()> {
    let header = Header {
        config: Some(plan.config.clone()),
        modalities: Some(plan.modalities.clone()),
        subsets: Some(plan.subsets.clone()),
        ..Header::new(PLAN_SCHEMA)
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for task in &plan.tasks {
        serde_json::to_writer(&mut out, task)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads and validates a plan file. Sample order is the order of the clean
/// tasks.
pub fn read_plan<R: BufRead>(reader: R) -> Result<PermutationPlan> {
    let mut it = lines(reader);
    let (line, text) = it.next().ok_or(Error::Parse {
        line: 1,
        message: "empty plan file".into(),
    })??;
    let header: Header = parse_line(line, &text)?;
    header.expect(PLAN_SCHEMA)?;
    let missing = |what: &str| Error::Parse {
        line,
        message: format!("plan header lacks `{what}`"),
    };
    let config = header.config.ok_or_else(|| missing("config"))?;
    let modalities = header.modalities.ok_or_else(|| missing("modalities"))?;
    let subsets = header.subsets.ok_or_else(|| missing("subsets"))?;

    let mut tasks = Vec::new();
    let mut sample_ids = Vec::new();
    for item in it {
        let (line, text) = item?;
        let task: PlanTask = parse_line(line, &text)?;
        if task.kind == TaskKind::Clean {
            sample_ids.push(task.sample_id.clone());
        }
        tasks.push(task);
    }
    let plan = PermutationPlan {
        config,
        modalities,
        subsets,
        sample_ids,
        tasks,
    };
    plan.validate()?;
    Ok(plan)
}

pub fn write_predictions<'a, W: Write>(
    records: impl IntoIterator<Item = &'a PredictionRecord>,
    mut out: W,
) -> Result<()> {
    serde_json::to_writer(&mut out, &Header::new(PREDICTIONS_SCHEMA))?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Streams prediction records; the header line is optional.
pub fn read_predictions<R: BufRead>(reader: R) -> impl Iterator<Item = Result<PredictionRecord>> {
    let mut first = true;
    lines(reader).filter_map(move |item| {
        let is_first = std::mem::replace(&mut first, false);
        match item {
            Err(e) => Some(Err(e)),
            Ok((line, text)) if is_first && is_header(&text) => {
                match parse_line::<Header>(line, &text).and_then(|h| h.expect(PREDICTIONS_SCHEMA)) {
                    Ok(()) => None,
                    Err(e) => Some(Err(e)),
                }
            }
            Ok((line, text)) => Some(parse_line(line, &text)),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::build_plan;

    #[test]
    fn samples_keep_extra_fields() {
        let text = r#"{"schema":"perceptual/samples","version":1}
{"sample_id":"q1","split":"test","group":"Y/N","label":{"class_label":"yes"},"question":"Is it red?"}

{"sample_id":"q1","split":"train","label":{"class_label":"no"}}
"#;
        let records = read_samples(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].field("question").as_deref(), Some("Is it red?"));
        assert_eq!(records[0].field("group").as_deref(), Some("Y/N"));
    }

    #[test]
    fn duplicate_sample_in_split() {
        let text = r#"{"sample_id":"a","split":"test","label":{"class_label":"x"}}
{"sample_id":"a","split":"test","label":{"class_label":"y"}}"#;
        assert!(matches!(read_samples(text.as_bytes()), Err(Error::DuplicateSample(_))));
    }

    #[test]
    fn plan_round_trip() {
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let subsets = vec![
            ModalitySet::parse("image").unwrap(),
            ModalitySet::parse("question").unwrap(),
        ];
        let plan = build_plan(&ids, &subsets, &RunConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_plan(&plan, &mut buf).unwrap();
        let back = read_plan(buf.as_slice()).unwrap();
        assert_eq!(back, plan);

        let first_task = String::from_utf8(buf).unwrap().lines().nth(2).unwrap().to_string();
        let v: Value = serde_json::from_str(&first_task).unwrap();
        for key in ["task_id", "kind", "sample_id", "repeat", "slot", "permuted", "donors"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn predictions_stream_with_and_without_header() {
        let body = "{\"task_id\":3,\"prediction\":{\"class_label\":\"yes\"}}\n{\"task_id\":4,\"score\":0.5}\n";
        let with = format!("{{\"schema\":\"perceptual/predictions\",\"version\":1}}\n{body}");
        for text in [body.to_string(), with] {
            let recs: Vec<_> = read_predictions(text.as_bytes()).collect::<Result<_>>().unwrap();
            assert_eq!(recs.len(), 2);
            assert_eq!(recs[1].score, Some(0.5));
        }
    }

    #[test]
    fn wrong_header_schema() {
        let text = "{\"schema\":\"perceptual/plan\",\"version\":1}\n";
        assert!(read_samples(text.as_bytes()).is_err());
    }
}
