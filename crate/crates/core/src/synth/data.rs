use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which latent quantity decides the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// `y = 1` iff `a·b + c > 0`; `c` shifts the decision boundary.
    ProductPlusC,
    /// `y = 1` iff `a·b > 0`; `c` acts only through the rejection margin.
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Dimensions of the `a`, `b` and `c` blocks.
    pub dims: [usize; 3],
    /// Half-width of the uniform distribution of the basis vectors.
    pub tau: f64,
    /// Rejection margin on `|a·b + c|`.
    pub delta: f64,
    /// Variance of the latent `c`.
    pub var_c: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub max_rejections: u64,
    pub label_rule: LabelRule,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dims: [2000, 1000, 100],
            tau: 1.0,
            delta: 0.25,
            var_c: 0.0,
            n_train: 1000,
            n_test: 1000,
            seed: 0,
            max_rejections: 100_000,
            label_rule: LabelRule::ProductPlusC,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Invalid("block dimensions must be at least 1".into()));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::Invalid("tau must be positive".into()));
        }
        if [self.delta, self.var_c].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Invalid("delta and var_c must be non-negative".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Invalid("train and test splits must be nonempty".into()));
        }
        Ok(())
    }
}

/// Latent scalars of one point; its features are `(a·A, b·B, c·C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub label: bool,
}

impl LatentPoint {
    pub fn scalars(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// The three fixed basis vectors; block `k` of a point is `scalar_k * basis_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub bases: [Vec<f64>; 3],
}

impl BlockLayout {
    pub fn input_dim(&self) -> usize {
        self.bases.iter().map(Vec::len).sum()
    }

    pub fn offsets(&self) -> [usize; 3] {
        [0, self.bases[0].len(), self.bases[0].len() + self.bases[1].len()]
    }

    /// Dense concatenated feature vector.
    pub fn features(&self, scalars: [f64; 3]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.input_dim());
        for (s, basis) in scalars.iter().zip(&self.bases) {
            x.extend(basis.iter().map(|v| s * v));
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub layout: BlockLayout,
    pub train: Vec<LatentPoint>,
    pub test: Vec<LatentPoint>,
}

/// Stream ids of the generator; separate streams keep `c` draws aligned
/// across variances (common random numbers).
const BASIS_STREAM: u64 = 0;
const C_STREAM: u64 = 1;
const AB_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws the basis vectors once, then per point `c ~ N(0, var_c)` followed by
/// `(a, b)` i.i.d. standard normal, rejected until `|a·b + c| > delta`.
/// The first `n_train` points form the train split.
pub fn generate_dataset(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut basis_rng = stream(config.seed, BASIS_STREAM);
    let uniform = Uniform::new_inclusive(-config.tau, config.tau).expect("tau validated");
    let bases = config
        .dims
        .map(|d| (0..d).map(|_| uniform.sample(&mut basis_rng)).collect::<Vec<f64>>());

    let mut c_rng = stream(config.seed, C_STREAM);
    let mut ab_rng = stream(config.seed, AB_STREAM);
    let std_c = config.var_c.sqrt();
    let total = config.n_train + config.n_test;
    let mut points = Vec::with_capacity(total);
    for _ in 0..total {
        let z: f64 = StandardNormal.sample(&mut c_rng);
        let c = if config.var_c == 0.0 { 0.0 } else { std_c * z };
        let (a, b) = sample_margin(&mut ab_rng, c, config.delta, config.max_rejections)?;
        let label = match config.label_rule {
            LabelRule::ProductPlusC => a * b + c > 0.0,
            LabelRule::Product => a * b > 0.0,
        };
        points.push(LatentPoint { a, b, c, label });
    }
    let test = points.split_off(config.n_train);
    Ok(SyntheticDataset {
        config: config.clone(),
        layout: BlockLayout { bases },
        train: points,
        test,
    })
}

fn sample_margin<R: Rng>(rng: &mut R, c: f64, delta: f64, limit: u64) -> Result<(f64, f64)> {
    for _ in 0..limit {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        if (a * b + c).abs() > delta {
            return Ok((a, b));
        }
    }
    Err(Error::RejectionLimit(limit))
}
