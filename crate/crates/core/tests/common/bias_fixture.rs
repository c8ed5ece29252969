//! Ten test questions and six train questions with hand-counted yes/no
//! proportions per leading token.

use std::collections::HashMap;
use std::io::Cursor;

use perceptual::bias::{prior_shift_table, GroupRule, PriorShift};
use perceptual::protocol::{read_samples, Split};

pub const SAMPLES: &str = r#"{"sample_id":"r0","split":"train","label":{"class_label":"yes"},"question":"Is the sun hot?"}
{"sample_id":"r1","split":"train","label":{"class_label":"yes"},"question":"Is the road wet?"}
{"sample_id":"r2","split":"train","label":{"class_label":"no"},"question":"Is the door open?"}
{"sample_id":"r3","split":"train","label":{"class_label":"no"},"question":"Is there a car?"}
{"sample_id":"r4","split":"train","label":{"class_label":"yes"},"question":"Does it fly?"}
{"sample_id":"r5","split":"train","label":{"class_label":"blue"},"question":"What color is it?"}
{"sample_id":"t0","split":"test","label":{"class_label":"yes"},"question":"Is the sky blue?"}
{"sample_id":"t1","split":"test","label":{"class_label":"no"},"question":"Is the cat black?"}
{"sample_id":"t2","split":"test","label":{"class_label":"yes"},"question":"Is there a dog?"}
{"sample_id":"t3","split":"test","label":{"class_label":"yes"},"question":"is there snow"}
{"sample_id":"t4","split":"test","label":{"class_label":"no"},"question":"IS THERE a cup?"}
{"sample_id":"t5","split":"test","label":{"class_label":"no"},"question":"Does it rain?"}
{"sample_id":"t6","split":"test","label":{"class_label":"yes"},"question":"Does he run?"}
{"sample_id":"t7","split":"test","label":{"class_label":"red"},"question":"What color?"}
{"sample_id":"t8","split":"test","label":{"class_label":"cat"},"question":"What is it?"}
{"sample_id":"t9","split":"test","label":{"class_label":"because"},"question":"Why?"}
"#;

pub const PREDICTED: [(&str, &str); 10] = [
    ("t0", "yes"),
    ("t1", "yes"),
    ("t2", "yes"),
    ("t3", "no"),
    ("t4", "yes"),
    ("t5", "no"),
    ("t6", "no"),
    ("t7", "yes"),
    ("t8", "cat"),
    ("t9", "because"),
];

pub type Row = (
    String,
    Option<Vec<f64>>,
    Option<Vec<f64>>,
    Option<Vec<f64>>,
    usize,
    usize,
);

pub fn table() -> PriorShift {
    let records = read_samples(Cursor::new(SAMPLES)).unwrap();
    let train: Vec<_> = records.iter().filter(|r| r.split == Split::Train).collect();
    let test: Vec<_> = records.iter().filter(|r| r.split == Split::Test).collect();
    let predictions: HashMap<String, String> = PREDICTED.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let classes = vec!["yes".to_string(), "no".to_string()];
    prior_shift_table(&train, &test, &predictions, &GroupRule::token(), &classes).unwrap()
}

pub fn rows(table: &PriorShift) -> Vec<Row> {
    table
        .rows
        .iter()
        .map(|r| {
            (
                r.group.clone(),
                r.predicted.clone(),
                r.test.clone(),
                r.train.clone(),
                r.test_count,
                r.train_count,
            )
        })
        .collect()
}

/// Counted by hand from the fixture; `why` has no tracked class.
pub fn expected_rows() -> Vec<Row> {
    let third = 1.0 / 3.0;
    let row = |g: &str, p: Option<Vec<f64>>, te: Option<Vec<f64>>, tr: Option<Vec<f64>>, nte, ntr| {
        (g.to_string(), p, te, tr, nte, ntr)
    };
    vec![
        row(
            "is there",
            Some(vec![2.0 * third, third]),
            Some(vec![2.0 * third, third]),
            Some(vec![0.0, 1.0]),
            3,
            1,
        ),
        row(
            "does",
            Some(vec![0.0, 1.0]),
            Some(vec![0.5, 0.5]),
            Some(vec![1.0, 0.0]),
            2,
            1,
        ),
        row(
            "is the",
            Some(vec![1.0, 0.0]),
            Some(vec![0.5, 0.5]),
            Some(vec![2.0 * third, third]),
            2,
            3,
        ),
        row("what", Some(vec![1.0, 0.0]), None, None, 0, 0),
    ]
}

/// Scores with ties; the documented order is ascending score, then id.
pub const LOW_SCORES: [(&str, f64); 8] = [
    ("h", 0.2),
    ("b", -0.5),
    ("g", 0.0),
    ("a", 0.0),
    ("e", -0.5),
    ("c", 1.0),
    ("f", 0.2),
    ("d", -1.0),
];
pub const LOW_SCORE_ORDER: [&str; 8] = ["d", "b", "e", "a", "g", "f", "h", "c"];
