//! Logistic regression and a one-hidden-layer ReLU network over the
//! concatenated block features, trained by full-batch gradient descent.
//!
//! Every block of a synthetic point is a scalar times a fixed basis vector,
//! so `W x = sum_k s_k (W_k basis_k)`. Training and inference use that
//! factorization; the weights themselves stay dense and the dense `logit`
//! path is kept for checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::data::{BlockLayout, LatentPoint, SyntheticDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once one epoch lowers the loss by less than this.
    pub tolerance: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 2000,
            tolerance: 1e-10,
            hidden: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

/// A model that scores latent points through precomputed block projections.
pub trait BlockScorer {
    fn project(&self, layout: &BlockLayout) -> Projected;
}

/// A model collapsed onto the three block directions.
#[derive(Debug, Clone, PartialEq)]
pub enum Projected {
    Linear {
        p: [f64; 3],
        bias: f64,
    },
    Mlp {
        p: Vec<[f64; 3]>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    },
}

impl Projected {
    pub fn logit(&self, s: [f64; 3]) -> f64 {
        match self {
            Projected::Linear { p, bias } => dot3(p, &s) + bias,
            Projected::Mlp { p, b1, w2, b2 } => {
                let mut o = *b2;
                for ((ph, bh), wh) in p.iter().zip(b1).zip(w2) {
                    let z = dot3(ph, &s) + bh;
                    if z > 0.0 {
                        o += wh * z;
                    }
                }
                o
            }
        }
    }

    pub fn predict(&self, s: [f64; 3]) -> bool {
        self.logit(s) > 0.0
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^o) - y o`, stable for large `|o|`.
fn logistic_loss(o: f64, y: f64) -> f64 {
    o.max(0.0) + (-o.abs()).exp().ln_1p() - y * o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(input_dim: usize) -> Self {
        Self {
            weights: vec![0.0; input_dim],
            bias: 0.0,
        }
    }

    /// Dense forward pass.
    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Mean logistic loss and the dense gradient `(weights, bias)`.
    pub fn loss_and_gradient(&self, layout: &BlockLayout, points: &[LatentPoint]) -> (f64, Vec<f64>, f64) {
        let projected = self.projections(layout);
        let (loss, g, gb) = self.reduced_gradient(&projected, points);
        let mut gw = vec![0.0; self.weights.len()];
        for (k, off) in layout.offsets().into_iter().enumerate() {
            for (j, v) in layout.bases[k].iter().enumerate() {
                gw[off + j] = g[k] * v;
            }
        }
        (loss, gw, gb)
    }

    fn projections(&self, layout: &BlockLayout) -> [f64; 3] {
        let off = layout.offsets();
        [0, 1, 2].map(|k| dot(&self.weights[off[k]..off[k] + layout.bases[k].len()], &layout.bases[k]))
    }

    /// Loss, gradient with respect to the three block scalars' projections,
    /// and bias gradient.
    fn reduced_gradient(&self, p: &[f64; 3], points: &[LatentPoint]) -> (f64, [f64; 3], f64) {
        let n = points.len() as f64;
        let mut loss = 0.0;
        let mut g = [0.0; 3];
        let mut gb = 0.0;
        for pt in points {
            let s = pt.scalars();
            let o = dot3(p, &s) + self.bias;
            loss += logistic_loss(o, pt.target());
            let d = (sigmoid(o) - pt.target()) / n;
            for k in 0..3 {
                g[k] += d * s[k];
            }
            gb += d;
        }
        (loss / n, g, gb)
    }
}

impl BlockScorer for LinearModel {
    fn project(&self, layout: &BlockLayout) -> Projected {
        Projected::Linear {
            p: self.projections(layout),
            bias: self.bias,
        }
    }
}

/// `w2 · relu(W1 x + b1) + b2` with a logistic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden: usize,
    /// Row-major `hidden x input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Dense MLP gradient, same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

struct MlpReduced {
    loss: f64,
    /// `hidden x 3`: gradient with respect to the block projections.
    g: Vec<[f64; 3]>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl MlpModel {
    /// Weights `N(0, 1/input_dim)` and `N(0, 1/hidden)`, zero biases.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, 1.0 / (input_dim as f64).sqrt()).expect("finite std");
        let n2 = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("finite std");
        Self {
            input_dim,
            hidden,
            w1: (0..hidden * input_dim).map(|_| n1.sample(&mut rng)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| n2.sample(&mut rng)).collect(),
            b2: 0.0,
        }
    }

    fn row(&self, h: usize) -> &[f64] {
        &self.w1[h * self.input_dim..(h + 1) * self.input_dim]
    }

    /// Dense forward pass.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut o = self.b2;
        for h in 0..self.hidden {
            let z = dot(self.row(h), x) + self.b1[h];
            if z > 0.0 {
                o += self.w2[h] * z;
            }
        }
        o
    }

    fn projections(&self, layout: &BlockLayout) -> Vec<[f64; 3]> {
        let off = layout.offsets();
        (0..self.hidden)
            .map(|h| {
                let row = self.row(h);
                [0, 1, 2].map(|k| dot(&row[off[k]..off[k] + layout.bases[k].len()], &layout.bases[k]))
            })
            .collect()
    }

    #[allow(clippy::needless_range_loop)]
    fn reduced_gradient(&self, p: &[[f64; 3]], points: &[LatentPoint]) -> MlpReduced {
        let n = points.len() as f64;
        let mut out = MlpReduced {
            loss: 0.0,
            g: vec![[0.0; 3]; self.hidden],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.hidden],
            b2: 0.0,
        };
        let mut z = vec![0.0; self.hidden];
        for pt in points {
            let s = pt.scalars();
            let mut o = self.b2;
            for h in 0..self.hidden {
                z[h] = dot3(&p[h], &s) + self.b1[h];
                if z[h] > 0.0 {
                    o += self.w2[h] * z[h];
                }
            }
            out.loss += logistic_loss(o, pt.target());
            let d = (sigmoid(o) - pt.target()) / n;
            out.b2 += d;
            for h in 0..self.hidden {
                if z[h] > 0.0 {
                    out.w2[h] += d * z[h];
                    let delta = d * self.w2[h];
                    out.b1[h] += delta;
                    for k in 0..3 {
                        out.g[h][k] += delta * s[k];
                    }
                }
            }
        }
        out.loss /= n;
        out
    }

    /// Mean logistic loss and the dense gradient.
    pub fn loss_and_gradient(&self, layout: &BlockLayout, points: &[LatentPoint]) -> (f64, MlpGradient) {
        let r = self.reduced_gradient(&self.projections(layout), points);
        let mut w1 = vec![0.0; self.w1.len()];
        let off = layout.offsets();
        for h in 0..self.hidden {
            let row = &mut w1[h * self.input_dim..(h + 1) * self.input_dim];
            for k in 0..3 {
                for (j, v) in layout.bases[k].iter().enumerate() {
                    row[off[k] + j] = r.g[h][k] * v;
                }
            }
        }
        (
            r.loss,
            MlpGradient {
                w1,
                b1: r.b1,
                w2: r.w2,
                b2: r.b2,
            },
        )
    }
}

impl BlockScorer for MlpModel {
    fn project(&self, layout: &BlockLayout) -> Projected {
        Projected::Mlp {
            p: self.projections(layout),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
    }
}

/// Fraction of points whose label the projected model predicts.
pub fn accuracy(model: &Projected, points: &[LatentPoint]) -> f64 {
    let hits = points.iter().filter(|p| model.predict(p.scalars()) == p.label).count();
    hits as f64 / points.len() as f64
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss(epoch))
    }
}

/// Logistic regression from zero weights.
pub fn train_logistic(data: &SyntheticDataset, config: &TrainConfig) -> Result<(LinearModel, TrainSummary)> {
    if data.train.is_empty() {
        return Err(Error::EmptyTrain(None));
    }
    let layout = &data.layout;
    let off = layout.offsets();
    let mut model = LinearModel::zeros(layout.input_dim());
    let mut prev = f64::INFINITY;
    let mut epochs = 0;
    for epoch in 0..config.max_epochs {
        let p = model.projections(layout);
        let (loss, g, gb) = model.reduced_gradient(&p, &data.train);
        check_loss(loss, epoch)?;
        epochs = epoch + 1;
        if prev - loss < config.tolerance && prev.is_finite() {
            break;
        }
        prev = loss;
        for k in 0..3 {
            let step = config.learning_rate * g[k];
            for (w, v) in model.weights[off[k]..].iter_mut().zip(&layout.bases[k]) {
                *w -= step * v;
            }
        }
        model.bias -= config.learning_rate * gb;
    }
    let (loss, _, _) = model.reduced_gradient(&model.projections(layout), &data.train);
    let train_accuracy = accuracy(&model.project(layout), &data.train);
    Ok((
        model,
        TrainSummary {
            epochs,
            loss,
            train_accuracy,
        },
    ))
}

/// Below this train accuracy on the `var_c = 0` dataset the network setup is
/// considered broken.
pub const MLP_MIN_TRAIN_ACCURACY: f64 = 0.95;

/// One-hidden-layer ReLU network.
pub fn train_mlp(data: &SyntheticDataset, config: &TrainConfig) -> Result<(MlpModel, TrainSummary)> {
    if data.train.is_empty() {
        return Err(Error::EmptyTrain(None));
    }
    if config.hidden == 0 {
        return Err(Error::Invalid("hidden width must be at least 1".into()));
    }
    let layout = &data.layout;
    let off = layout.offsets();
    let dim = layout.input_dim();
    let mut model = MlpModel::init(dim, config.hidden, config.seed);
    let lr = config.learning_rate;
    let mut prev = f64::INFINITY;
    let mut epochs = 0;
    for epoch in 0..config.max_epochs {
        let p = model.projections(layout);
        let r = model.reduced_gradient(&p, &data.train);
        check_loss(r.loss, epoch)?;
        epochs = epoch + 1;
        if prev - r.loss < config.tolerance && prev.is_finite() {
            break;
        }
        prev = r.loss;
        for h in 0..model.hidden {
            let row = &mut model.w1[h * dim..(h + 1) * dim];
            for k in 0..3 {
                let step = lr * r.g[h][k];
                for (w, v) in row[off[k]..].iter_mut().zip(&layout.bases[k]) {
                    *w -= step * v;
                }
            }
        }
        for h in 0..model.hidden {
            model.b1[h] -= lr * r.b1[h];
            model.w2[h] -= lr * r.w2[h];
        }
        model.b2 -= lr * r.b2;
    }
    let projected = model.project(layout);
    let loss = model.reduced_gradient(&model.projections(layout), &data.train).loss;
    let train_accuracy = accuracy(&projected, &data.train);
    if data.config.var_c == 0.0 && train_accuracy < MLP_MIN_TRAIN_ACCURACY {
        return Err(Error::TrainingFailed(train_accuracy));
    }
    Ok((
        model,
        TrainSummary {
            epochs,
            loss,
            train_accuracy,
        },
    ))
}
