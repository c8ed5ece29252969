//! Donor assignments that replace a subset of modalities with the same
//! modalities taken from another test sample.
//!
//! Each Monte-Carlo donor is a pure function of
//! `(master_seed, subset index, repeat, sample index, slot)`: the five values
//! are packed into a ChaCha8 key and the first draw of that stream picks the
//! donor. Plans therefore build in parallel without changing a single byte.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::{ModalityId, ModalitySet};
use crate::score::{Mode, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Clean,
    Permuted,
}

/// One model evaluation. Clean tasks carry repeat 0 and no slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanTask {
    pub task_id: u64,
    pub kind: TaskKind,
    pub sample_id: String,
    pub repeat: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<u32>,
    pub permuted: Vec<ModalityId>,
    pub donors: BTreeMap<ModalityId, String>,
}

impl PlanTask {
    /// The permuted modalities as a subset; `None` for clean tasks.
    pub fn subset(&self) -> Option<ModalitySet> {
        match self.kind {
            TaskKind::Clean => None,
            TaskKind::Permuted => ModalitySet::new(self.permuted.clone()).ok(),
        }
    }

    /// Sample whose block feeds modality `m`: the donor when `m` is permuted,
    /// the task's own sample otherwise.
    pub fn source_of(&self, m: &ModalityId) -> &str {
        self.donors.get(m).map_or(self.sample_id.as_str(), String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub config: RunConfig,
    pub modalities: Vec<ModalityId>,
    pub subsets: Vec<ModalitySet>,
    pub sample_ids: Vec<String>,
    pub tasks: Vec<PlanTask>,
}

impl PermutationPlan {
    /// Donor slots per `(sample, subset, repeat)`.
    pub fn slots_per_repeat(&self) -> usize {
        slots_per_repeat(&self.config, self.sample_ids.len())
    }

    pub fn permuted_tasks_per_sample(&self) -> usize {
        self.subsets.len() * self.config.repeats as usize * self.slots_per_repeat()
    }

    /// Checks the structural invariants of a plan read from elsewhere.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        crate::modality::validate_subsets(&self.subsets, &self.modalities)?;
        let known: HashSet<&str> = self.sample_ids.iter().map(String::as_str).collect();
        if known.len() != self.sample_ids.len() {
            return Err(Error::Invalid("plan lists a sample_id twice".into()));
        }
        let per_sample = 1 + self.permuted_tasks_per_sample();
        if self.tasks.len() != per_sample * self.sample_ids.len() {
            return Err(Error::Invalid(format!(
                "plan has {} tasks, expected {}",
                self.tasks.len(),
                per_sample * self.sample_ids.len()
            )));
        }
        let mut ids = HashSet::with_capacity(self.tasks.len());
        for t in &self.tasks {
            if !ids.insert(t.task_id) {
                return Err(Error::DuplicateTask(t.task_id));
            }
            if !known.contains(t.sample_id.as_str()) {
                return Err(Error::Invalid(format!(
                    "task {} names unknown sample `{}`",
                    t.task_id, t.sample_id
                )));
            }
            match t.kind {
                TaskKind::Clean if !t.donors.is_empty() || !t.permuted.is_empty() => {
                    return Err(Error::Invalid(format!("clean task {} has donors", t.task_id)));
                }
                TaskKind::Permuted => {
                    let subset = t
                        .subset()
                        .filter(|s| self.subsets.contains(s))
                        .ok_or_else(|| Error::Invalid(format!("task {} permutes an unplanned subset", t.task_id)))?;
                    let donor_keys: Vec<&ModalityId> = t.donors.keys().collect();
                    if donor_keys != subset.members().iter().collect::<Vec<_>>() {
                        return Err(Error::Invalid(format!(
                            "task {} donors do not match permuted modalities",
                            t.task_id
                        )));
                    }
                    let mut donors = t.donors.values();
                    let first = donors.next().expect("subset is nonempty");
                    if donors.any(|d| d != first) {
                        return Err(Error::Invalid(format!("task {} mixes donors", t.task_id)));
                    }
                    if !known.contains(first.as_str()) {
                        return Err(Error::Invalid(format!(
                            "task {} donor `{first}` is not a test sample",
                            t.task_id
                        )));
                    }
                    if t.repeat == 0 || t.repeat > self.config.repeats {
                        return Err(Error::Invalid(format!(
                            "task {} repeat {} out of range",
                            t.task_id, t.repeat
                        )));
                    }
                }
                TaskKind::Clean => {}
            }
        }
        Ok(())
    }
}

fn slots_per_repeat(config: &RunConfig, n: usize) -> usize {
    match config.mode {
        Mode::MonteCarlo => config.permutations as usize,
        Mode::Exact if config.exclude_self => n - 1,
        Mode::Exact => n,
    }
}

/// Builds the plan for `config.mode`.
pub fn build_plan(sample_ids: &[String], subsets: &[ModalitySet], config: &RunConfig) -> Result<PermutationPlan> {
    match config.mode {
        Mode::MonteCarlo => build(sample_ids, subsets, config, |key, n| {
            draw_donor(config.master_seed, key, n, config.exclude_self)
        }),
        Mode::Exact => build_exact_plan(sample_ids, subsets, config),
    }
}

/// Exhaustive plan: every test sample (except, optionally, the sample itself)
/// is the donor of exactly one slot in every `(sample, subset, repeat)`.
pub fn build_exact_plan(sample_ids: &[String], subsets: &[ModalitySet], config: &RunConfig) -> Result<PermutationPlan> {
    if config.mode != Mode::Exact {
        return Err(Error::Invalid("exact plan requested with monte_carlo mode".into()));
    }
    build(sample_ids, subsets, config, |key, _| {
        let d = key.slot as usize - 1;
        if config.exclude_self && d >= key.sample as usize {
            d + 1
        } else {
            d
        }
    })
}

/// Coordinates of one donor draw; `slot` is 1-based.
#[derive(Debug, Clone, Copy)]
pub struct DrawKey {
    pub subset: u32,
    pub repeat: u32,
    pub sample: u64,
    pub slot: u64,
}

/// Uniform donor index in `0..n`, skipping `sample` when `exclude_self`.
pub fn draw_donor(master_seed: u64, key: DrawKey, n: usize, exclude_self: bool) -> usize {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..12].copy_from_slice(&key.subset.to_le_bytes());
    seed[12..16].copy_from_slice(&key.repeat.to_le_bytes());
    seed[16..24].copy_from_slice(&key.sample.to_le_bytes());
    seed[24..32].copy_from_slice(&key.slot.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    if exclude_self {
        let j = rng.random_range(0..n - 1);
        if j >= key.sample as usize {
            j + 1
        } else {
            j
        }
    } else {
        rng.random_range(0..n)
    }
}

fn build<F>(sample_ids: &[String], subsets: &[ModalitySet], config: &RunConfig, donor: F) -> Result<PermutationPlan>
where
    F: Fn(DrawKey, usize) -> usize + Sync,
{
    config.validate()?;
    if sample_ids.is_empty() {
        return Err(Error::Invalid("no test samples".into()));
    }
    let mut seen = HashSet::with_capacity(sample_ids.len());
    for id in sample_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateSample(id.clone()));
        }
    }
    if subsets.is_empty() {
        return Err(Error::Invalid("no modality subsets".into()));
    }
    let n = sample_ids.len();
    if config.exclude_self && n < 2 {
        return Err(Error::NoValidDonor);
    }

    let mut modalities: Vec<ModalityId> = subsets.iter().flat_map(|s| s.members().iter().cloned()).collect();
    modalities.sort();
    modalities.dedup();

    let slots = slots_per_repeat(config, n) as u32;
    let per_sample: Vec<Vec<PlanTask>> = sample_ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut tasks = Vec::with_capacity(1 + subsets.len() * (config.repeats * slots) as usize);
            tasks.push(PlanTask {
                task_id: 0,
                kind: TaskKind::Clean,
                sample_id: id.clone(),
                repeat: 0,
                slot: None,
                permuted: Vec::new(),
                donors: BTreeMap::new(),
            });
            for (si, subset) in subsets.iter().enumerate() {
                for repeat in 1..=config.repeats {
                    for slot in 1..=slots {
                        let key = DrawKey {
                            subset: si as u32,
                            repeat,
                            sample: i as u64,
                            slot: slot as u64,
                        };
                        let d = donor(key, n);
                        let donor_id = &sample_ids[d];
                        tasks.push(PlanTask {
                            task_id: 0,
                            kind: TaskKind::Permuted,
                            sample_id: id.clone(),
                            repeat,
                            slot: Some(slot),
                            permuted: subset.members().to_vec(),
                            donors: subset.members().iter().map(|m| (m.clone(), donor_id.clone())).collect(),
                        });
                    }
                }
            }
            tasks
        })
        .collect();

    let mut tasks: Vec<PlanTask> = per_sample.into_iter().flatten().collect();
    for (k, t) in tasks.iter_mut().enumerate() {
        t.task_id = k as u64;
    }
    Ok(PermutationPlan {
        config: config.clone(),
        modalities,
        subsets: subsets.to_vec(),
        sample_ids: sample_ids.to_vec(),
        tasks,
    })
}
