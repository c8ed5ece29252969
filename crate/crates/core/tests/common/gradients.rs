//! Central finite differences against losses recomputed from dense features.

use perceptual::synth::{generate_dataset, LatentPoint, LinearModel, MlpModel, SyntheticConfig, SyntheticDataset};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

pub fn small_dataset(seed: u64) -> SyntheticDataset {
    generate_dataset(&SyntheticConfig {
        dims: [6, 5, 4],
        var_c: 0.5,
        n_train: 40,
        n_test: 40,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn bce(logit: f64, y: f64) -> f64 {
    let p = 1.0 / (1.0 + (-logit).exp());
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn dense_loss(points: &[LatentPoint], data: &SyntheticDataset, logit: impl Fn(&[f64]) -> f64) -> f64 {
    points
        .iter()
        .map(|p| bce(logit(&data.layout.features(p.scalars())), p.target()))
        .sum::<f64>()
        / points.len() as f64
}

pub fn linear_logit(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b
}

pub fn mlp_logit(m: &MlpModel, x: &[f64]) -> f64 {
    let mut o = m.b2;
    for h in 0..m.hidden {
        let z: f64 = (0..m.input_dim).map(|j| m.w1[h * m.input_dim + j] * x[j]).sum::<f64>() + m.b1[h];
        o += m.w2[h] * z.max(0.0);
    }
    o
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Largest relative error over sampled weights and the bias, together with
/// the gap between the library loss and the dense loss.
pub fn logistic_check(seed: u64) -> (f64, f64) {
    let data = small_dataset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let dim = data.layout.input_dim();
    let model = LinearModel {
        weights: (0..dim).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect(),
        bias: 0.1,
    };
    let (loss, gw, gb) = model.loss_and_gradient(&data.layout, &data.train);
    let probe = |w: &[f64], b: f64| dense_loss(&data.train, &data, |x| linear_logit(w, b, x));
    let loss_gap = (loss - probe(&model.weights, model.bias)).abs();

    let mut worst: f64 = 0.0;
    for j in sample(&mut rng, dim, 8) {
        let mut plus = model.weights.clone();
        let mut minus = model.weights.clone();
        plus[j] += H;
        minus[j] -= H;
        let numeric = (probe(&plus, model.bias) - probe(&minus, model.bias)) / (2.0 * H);
        worst = worst.max(rel_err(gw[j], numeric));
    }
    let numeric = (probe(&model.weights, model.bias + H) - probe(&model.weights, model.bias - H)) / (2.0 * H);
    (worst.max(rel_err(gb, numeric)), loss_gap)
}

pub fn mlp_check(seed: u64) -> (f64, f64) {
    let data = small_dataset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
    let mut model = MlpModel::init(data.layout.input_dim(), 8, seed);
    model.b1.iter_mut().enumerate().for_each(|(h, b)| *b = 0.05 * h as f64);
    model.b2 = -0.2;
    let (loss, g) = model.loss_and_gradient(&data.layout, &data.train);
    let loss_gap = (loss - dense_loss(&data.train, &data, |x| mlp_logit(&model, x))).abs();

    let numeric = |edit: &dyn Fn(&mut MlpModel, f64)| {
        let mut plus = model.clone();
        let mut minus = model.clone();
        edit(&mut plus, H);
        edit(&mut minus, -H);
        (dense_loss(&data.train, &data, |x| mlp_logit(&plus, x))
            - dense_loss(&data.train, &data, |x| mlp_logit(&minus, x)))
            / (2.0 * H)
    };
    let mut worst: f64 = 0.0;
    for j in sample(&mut rng, model.w1.len(), 12) {
        worst = worst.max(rel_err(g.w1[j], numeric(&|m, d| m.w1[j] += d)));
    }
    for h in sample(&mut rng, model.hidden, 4) {
        worst = worst.max(rel_err(g.b1[h], numeric(&|m, d| m.b1[h] += d)));
        worst = worst.max(rel_err(g.w2[h], numeric(&|m, d| m.w2[h] += d)));
    }
    worst = worst.max(rel_err(g.b2, numeric(&|m, d| m.b2 += d)));
    (worst, loss_gap)
}
