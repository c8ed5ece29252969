#![allow(dead_code)]

pub mod bias_fixture;
pub mod gradients;

use std::collections::HashMap;

use perceptual::metrics::{LabelSpec, Metric, PredictionSpec};
use perceptual::protocol::{evaluate_in_process, Ingested};
use perceptual::{ModalityId, ModalitySet, PermutationPlan, PlanTask};

/// Small two-modality dataset with integer features and a deterministic
/// model `class = (image + 2 * question) mod 3`.
pub struct Fixture {
    pub ids: Vec<String>,
    pub image: Vec<i64>,
    pub question: Vec<i64>,
    pub labels: Vec<String>,
}

pub fn model(image: i64, question: i64) -> String {
    ((image + 2 * question).rem_euclid(3)).to_string()
}

/// Model that never looks at the image.
pub fn image_blind(_image: i64, question: i64) -> String {
    (question.rem_euclid(3)).to_string()
}

impl Fixture {
    pub fn six() -> Self {
        Self::new(
            &[0, 1, 2, 0, 1, 2],
            &[0, 0, 1, 1, 2, 2],
            &["0", "2", "1", "0", "1", "0"],
        )
    }

    pub fn new(image: &[i64], question: &[i64], labels: &[&str]) -> Self {
        Self {
            ids: (0..image.len()).map(|i| format!("s{i}")).collect(),
            image: image.to_vec(),
            question: question.to_vec(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn label_map(&self) -> HashMap<String, LabelSpec> {
        self.ids
            .iter()
            .zip(&self.labels)
            .map(|(id, l)| (id.clone(), LabelSpec::ClassLabel(l.clone())))
            .collect()
    }

    fn index(&self, id: &str) -> usize {
        self.ids.iter().position(|x| x == id).expect("known sample")
    }

    /// Composes the task's inputs from its own and its donor's blocks.
    pub fn predict(&self, f: fn(i64, i64) -> String, task: &PlanTask) -> PredictionSpec {
        let image = self.image[self.index(task.source_of(&modality("image")))];
        let question = self.question[self.index(task.source_of(&modality("question")))];
        PredictionSpec::ClassLabel(f(image, question))
    }

    pub fn run(&self, plan: &PermutationPlan, f: fn(i64, i64) -> String) -> Ingested {
        evaluate_in_process(plan, &self.label_map(), Metric::ExactMatch, |t| self.predict(f, t)).unwrap()
    }

    /// Independent oracle: for every sample, average the 0/1 hit over every
    /// possible donor of `permuted`, then average over samples.
    pub fn brute_force_permuted_accuracy(&self, f: fn(i64, i64) -> String, permuted: &str, exclude_self: bool) -> f64 {
        let n = self.ids.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut hits = 0.0;
            let mut donors = 0.0;
            for j in 0..n {
                if exclude_self && i == j {
                    continue;
                }
                let (img, q) = match permuted {
                    "image" => (self.image[j], self.question[i]),
                    "question" => (self.image[i], self.question[j]),
                    _ => (self.image[j], self.question[j]),
                };
                if f(img, q) == self.labels[i] {
                    hits += 1.0;
                }
                donors += 1.0;
            }
            total += hits / donors;
        }
        total / n as f64
    }

    pub fn clean_accuracy(&self, f: fn(i64, i64) -> String) -> f64 {
        let hits = (0..self.ids.len())
            .filter(|&i| f(self.image[i], self.question[i]) == self.labels[i])
            .count();
        hits as f64 / self.ids.len() as f64
    }
}

pub fn modality(name: &str) -> ModalityId {
    ModalityId::new(name).unwrap()
}

pub fn subset(spec: &str) -> ModalitySet {
    ModalitySet::parse(spec).unwrap()
}
