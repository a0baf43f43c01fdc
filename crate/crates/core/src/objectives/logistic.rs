//! ℓ1/ℓ2-regularized logistic regression split into per-worker batches.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{BlockPartition, CompositeProblem, ConvexityFlag, SmoothPart, Smoothness};
use crate::prox::Regularizer;

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-z})`.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Component `i` is the batch mean of `log(1 + exp(−y qᵀx))` plus
/// `(λ₂/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogisticSmooth {
    batches: Vec<Vec<Sample>>,
    lambda2: f64,
    dimension: usize,
}

impl LogisticSmooth {
    pub fn new(batches: Vec<Vec<Sample>>, lambda2: f64, dimension: usize) -> Result<Self> {
        if batches.is_empty() {
            return Err(Error::EmptyBatch("no batches".into()));
        }
        if let Some(i) = batches.iter().position(|b| b.is_empty()) {
            return Err(Error::EmptyBatch(format!("batch {i} has no samples")));
        }
        if !(lambda2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda2 must be nonnegative, got {lambda2}"
            )));
        }
        Ok(Self {
            batches,
            lambda2,
            dimension,
        })
    }

    pub fn batches(&self) -> &[Vec<Sample>] {
        &self.batches
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

impl SmoothPart for LogisticSmooth {
    fn n_components(&self) -> usize {
        self.batches.len()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let batch = &self.batches[i];
        let loss: f64 = batch.iter().map(|s| softplus(-s.label * s.dot(x))).sum();
        loss / batch.len() as f64 + 0.5 * self.lambda2 * linalg::norm_sq(x)
    }

    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let batch = &self.batches[i];
        let inv = 1.0 / batch.len() as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda2 * xi;
        }
        for s in batch {
            // d/dx log(1 + exp(−y qᵀx)) = −y σ(−y qᵀx) q
            let coef = -s.label * sigmoid(-s.label * s.dot(x)) * inv;
            for &(j, v) in &s.features {
                out[j] += coef * v;
            }
        }
    }

    /// `Lᵢ = mean_s ‖q_s‖²/4 + λ₂`. For `L̂`, the Hessian sub-block `(i, j)` is
    /// bounded by the batch-averaged `‖q_s⁽ⁱ⁾‖‖q_s⁽ʲ⁾‖/4` (+ λ₂ on the diagonal).
    fn smoothness(&self, partition: &BlockPartition) -> Result<Smoothness> {
        let component: Vec<f64> = self
            .batches
            .iter()
            .map(|b| b.iter().map(Sample::norm_sq).sum::<f64>() / (4.0 * b.len() as f64) + self.lambda2)
            .collect();
        let m = partition.len();
        let mut block_of = vec![0usize; self.dimension];
        for j in 0..m {
            for c in partition.range(j)? {
                block_of[c] = j;
            }
        }
        let n = self.batches.len() as f64;
        let mut pair = vec![0.0f64; m * m];
        let mut norms = vec![0.0f64; m];
        for batch in &self.batches {
            let w = 1.0 / (4.0 * n * batch.len() as f64);
            for s in batch {
                norms.iter_mut().for_each(|v| *v = 0.0);
                for &(c, v) in &s.features {
                    norms[block_of[c]] += v * v;
                }
                let touched: Vec<(usize, f64)> = norms
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(j, v)| (j, v.sqrt()))
                    .collect();
                for &(a, na) in &touched {
                    for &(b, nb) in &touched {
                        pair[a * m + b] += w * na * nb;
                    }
                }
            }
        }
        for j in 0..m {
            pair[j * m + j] += self.lambda2;
        }
        let blockwise = pair.iter().copied().fold(0.0, f64::max);
        Smoothness::new(component, blockwise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_batches: usize,
    pub shuffle_seed: u64,
    pub n_blocks: usize,
}

/// Seeded shuffle, then contiguous batches (earlier batches take the
/// remainder). `r = λ₁‖x‖₁`. Flagged proximal PL with `σ = λ₂` when `λ₂ > 0`.
pub fn build_logistic_problem(dataset: &Dataset, spec: &LogisticSpec) -> Result<CompositeProblem> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyBatch("dataset has no samples".into()));
    }
    if spec.n_batches == 0 || spec.n_batches > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} samples into {} batches",
            spec.n_batches
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.shuffle_seed));
    let base = n / spec.n_batches;
    let extra = n % spec.n_batches;
    let mut batches = Vec::with_capacity(spec.n_batches);
    let mut start = 0;
    for i in 0..spec.n_batches {
        let len = base + usize::from(i < extra);
        batches.push(
            order[start..start + len]
                .iter()
                .map(|&k| dataset.samples[k].clone())
                .collect(),
        );
        start += len;
    }
    let smooth = LogisticSmooth::new(batches, spec.lambda2, dataset.dimension)?;
    let partition = BlockPartition::even(dataset.dimension, spec.n_blocks)?;
    let convexity = if spec.lambda2 > 0.0 {
        ConvexityFlag::ProximalPl {
            sigma: spec.lambda2,
            convex: true,
        }
    } else {
        ConvexityFlag::Convex
    };
    CompositeProblem::new(Arc::new(smooth), Regularizer::l1(spec.lambda1)?, partition, convexity)
}
