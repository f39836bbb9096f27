//! Seeded synthetic regression problems.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, TargetValues};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Features in correlated blocks; the target mixes a sparse linear part with
/// products of features that share a block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRegression {
    pub n_obs: usize,
    pub n_blocks: usize,
    pub block_size: usize,
    /// Correlation between any two features of the same block.
    pub within_corr: f64,
    pub n_linear: usize,
    pub n_interactions: usize,
    pub linear_scale: f64,
    pub interaction_scale: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for BlockRegression {
    fn default() -> Self {
        Self {
            n_obs: 2000,
            n_blocks: 30,
            block_size: 10,
            within_corr: 0.6,
            n_linear: 15,
            n_interactions: 15,
            linear_scale: 0.3,
            interaction_scale: 0.3,
            noise_sd: 1.5,
            seed: 0,
        }
    }
}

/// One product term `coef * x[a] * x[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub a: usize,
    pub b: usize,
    pub coef: f64,
}

/// The generated data and the model that produced it.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    pub linear: Vec<f64>,
    pub interactions: Vec<Interaction>,
    /// Target without noise, per row.
    pub signal: Vec<f64>,
}

impl BlockRegression {
    pub fn n_features(&self) -> usize {
        self.n_blocks * self.block_size
    }

    pub fn generate(&self) -> Result<Generated> {
        let n = self.n_features();
        if n == 0 || self.block_size < 2 && self.n_interactions > 0 {
            return Err(Error::Config("need blocks of at least two features".into()));
        }
        if !(0.0..1.0).contains(&self.within_corr) {
            return Err(Error::Config(
                "within-block correlation must be in [0, 1)".into(),
            ));
        }
        if self.n_linear > n {
            return Err(Error::Config("more linear terms than features".into()));
        }
        let mut rng = stream_rng(self.seed, 0);

        let mut linear = vec![0.0; n];
        for j in sample(&mut rng, n, self.n_linear) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            linear[j] = sign * self.linear_scale * rng.random_range(0.5..1.5);
        }
        let interactions: Vec<Interaction> = (0..self.n_interactions)
            .map(|_| {
                let block = rng.random_range(0..self.n_blocks);
                let pair = sample(&mut rng, self.block_size, 2);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                Interaction {
                    a: block * self.block_size + pair.index(0),
                    b: block * self.block_size + pair.index(1),
                    coef: sign * self.interaction_scale * rng.random_range(0.5..1.5),
                }
            })
            .collect();

        let shared = self.within_corr.sqrt();
        let own = (1.0 - self.within_corr).sqrt();
        let noise = Normal::new(0.0, self.noise_sd)
            .map_err(|e| Error::Config(format!("noise scale: {e}")))?;
        let mut features = Vec::with_capacity(self.n_obs * n);
        let mut signal = Vec::with_capacity(self.n_obs);
        let mut targets = Vec::with_capacity(self.n_obs);
        for _ in 0..self.n_obs {
            let start = features.len();
            for _ in 0..self.n_blocks {
                let z: f64 = StandardNormal.sample(&mut rng);
                for _ in 0..self.block_size {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    features.push(shared * z + own * e);
                }
            }
            let x = &features[start..];
            let mut s: f64 = x.iter().zip(&linear).map(|(a, b)| a * b).sum();
            s += interactions
                .iter()
                .map(|t| t.coef * x[t.a] * x[t.b])
                .sum::<f64>();
            signal.push(s);
            targets.push(s + noise.sample(&mut rng));
        }
        let data = Dataset::new(features, self.n_obs, n, TargetValues::Values(targets))?;
        Ok(Generated {
            data,
            linear,
            interactions,
            signal,
        })
    }
}

/// `y = X w + noise` with independent standard normal features.
pub fn linear_regression(
    n_obs: usize,
    n_features: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    let mut rng = stream_rng(seed, 0);
    let weights: Vec<f64> = (0..n_features)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise =
        Normal::new(0.0, noise_sd).map_err(|e| Error::Config(format!("noise scale: {e}")))?;
    let mut features = Vec::with_capacity(n_obs * n_features);
    let mut targets = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let row: Vec<f64> = (0..n_features)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let y: f64 = row.iter().zip(&weights).map(|(a, b)| a * b).sum();
        targets.push(y + noise.sample(&mut rng));
        features.extend(row);
    }
    Ok((
        Dataset::new(features, n_obs, n_features, TargetValues::Values(targets))?,
        weights,
    ))
}
