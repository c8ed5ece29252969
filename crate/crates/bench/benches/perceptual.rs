use std::collections::HashMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perceptual::protocol::{evaluate_in_process, write_plan};
use perceptual::synth::{generate_dataset, train_logistic, train_mlp, SyntheticConfig, TrainConfig};
use perceptual::{
    build_plan, dataset_perceptual_score, Baselines, LabelSpec, Metric, ModalityId, ModalitySet, PredictionSpec,
    RunConfig,
};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:06}")).collect()
}

fn subsets() -> Vec<ModalitySet> {
    ["image", "question"]
        .iter()
        .map(|s| ModalitySet::parse(s).unwrap())
        .collect()
}

fn plans(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan");
    for n in [1_000, 10_000] {
        let ids = ids(n);
        group.bench_with_input(BenchmarkId::new("build", n), &ids, |b, ids| {
            b.iter(|| build_plan(black_box(ids), &subsets(), &RunConfig::default()).unwrap())
        });
    }
    let plan = build_plan(&ids(1_000), &subsets(), &RunConfig::default()).unwrap();
    group.bench_function("write/1000", |b| {
        b.iter(|| {
            let mut buf = Vec::with_capacity(1 << 20);
            write_plan(black_box(&plan), &mut buf).unwrap();
            buf
        })
    });
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let n = 5_000;
    let ids = ids(n);
    let config = RunConfig::default();
    let plan = build_plan(&ids, &subsets(), &config).unwrap();
    let labels: HashMap<String, LabelSpec> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), LabelSpec::ClassLabel((i % 3).to_string())))
        .collect();
    let image = ModalityId::new("image").unwrap();
    let predict = |t: &perceptual::PlanTask| {
        let donor: usize = t.source_of(&image)[1..].parse().unwrap();
        PredictionSpec::ClassLabel((donor % 3).to_string())
    };
    c.bench_function("ingest/5000", |b| {
        b.iter(|| evaluate_in_process(&plan, &labels, Metric::ExactMatch, predict).unwrap())
    });
    let evals = evaluate_in_process(&plan, &labels, Metric::ExactMatch, predict)
        .unwrap()
        .evaluations;
    c.bench_function("score/5000", |b| {
        b.iter(|| dataset_perceptual_score(black_box(&evals), &subsets()[0], &Baselines::new(0.4), &config).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let data = generate_dataset(&SyntheticConfig {
        var_c: 0.5,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train-20-epochs");
    group.sample_size(10);
    group.bench_function("logistic", |b| b.iter(|| train_logistic(&data, &cfg).unwrap()));
    group.bench_function("mlp", |b| b.iter(|| train_mlp(&data, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, plans, scoring, training);
criterion_main!(benches);
