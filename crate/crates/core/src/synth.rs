//! Seeded stochastic-block-model datasets.
//!
//! One block per class. Edge probability between nodes of blocks `a` and `b`
//! is `p_in` (same block) or `p_out`, times `weight[a] * weight[b]`; a block
//! with a small weight ends up with low-degree, low-centrality nodes.
//! Features are Gaussian around a per-class mean.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{AttributeSet, Error, Graph, Matrix, Result, Split, TaskKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub block_weights: Vec<f64>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the class means around the origin.
    pub mean_spread: f64,
    /// Standard deviation of each feature around its class mean.
    pub noise: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SbmConfig {
    /// `blocks` equal blocks over `n` nodes, all of weight one.
    pub fn balanced(n: usize, blocks: usize, seed: u64) -> Self {
        let base = n / blocks;
        let mut sizes = alloc::vec![base; blocks];
        sizes[0] += n - base * blocks;
        Self {
            block_sizes: sizes,
            block_weights: alloc::vec![1.0; blocks],
            p_in: 0.02,
            p_out: 0.002,
            feature_dim: 16,
            mean_spread: 1.0,
            noise: 1.0,
            train_fraction: 0.6,
            val_fraction: 0.2,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.len() != self.block_weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} block sizes but {} block weights",
                self.block_sizes.len(),
                self.block_weights.len()
            )));
        }
        let probability = |p: f64| (0.0..=1.0).contains(&p);
        if !probability(self.p_in) || !probability(self.p_out) {
            return Err(Error::InvalidParameter("edge probabilities must lie in [0, 1]".into()));
        }
        if self.block_weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("block weights must be finite and non-negative".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidParameter("need at least one feature".into()));
        }
        if !(self.noise >= 0.0 && self.mean_spread >= 0.0) {
            return Err(Error::InvalidParameter("spreads must be non-negative".into()));
        }
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t >= 0.0 && v >= 0.0 && t + v <= 1.0) {
            return Err(Error::InvalidParameter("split fractions must be non-negative and sum to at most 1".into()));
        }
        Ok(())
    }
}

/// Draws a graph and its attributes.
pub fn stochastic_block_model(cfg: &SbmConfig) -> Result<(Graph, AttributeSet)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_nodes();
    let block_of: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| core::iter::repeat_n(b, s))
        .collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let (a, b) = (block_of[u], block_of[v]);
            let base = if a == b { cfg.p_in } else { cfg.p_out };
            let p = (base * cfg.block_weights[a] * cfg.block_weights[b]).min(1.0);
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let blocks = cfg.block_sizes.len();
    let means: Vec<f64> = (0..blocks * cfg.feature_dim)
        .map(|_| cfg.mean_spread * unit.sample(&mut rng))
        .collect();
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    for v in 0..n {
        let mean = &means[block_of[v] * cfg.feature_dim..(block_of[v] + 1) * cfg.feature_dim];
        for (f, m) in features.row_mut(v).iter_mut().zip(mean) {
            *f = m + cfg.noise * unit.sample(&mut rng);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = libm::round(cfg.train_fraction * n as f64) as usize;
    let n_val = (libm::round(cfg.val_fraction * n as f64) as usize).min(n - n_train);
    let mut split = alloc::vec![Split::Test; n];
    for (rank, &v) in order.iter().enumerate() {
        if rank < n_train {
            split[v] = Split::Train;
        } else if rank < n_train + n_val {
            split[v] = Split::Val;
        }
    }

    let labels = AttributeSet::one_hot(&block_of, blocks)?;
    let attrs = AttributeSet::new(features, labels, split, TaskKind::MultiClass)?;
    Ok((graph, attrs))
}
