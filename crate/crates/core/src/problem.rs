//! Composite objective `P = f + r` with component-wise (`f = (1/n) Σ fᵢ`) and
//! block-wise structure, plus the smoothness constants the step sizes need.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::prox::Regularizer;

/// Ordered block sizes `d₁..d_m` with `Σ dⱼ = d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidParameter("partition needs at least one block".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidParameter("block sizes must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Split `dimension` into `blocks` nearly equal blocks; earlier blocks
    /// take the extra coordinates.
    pub fn even(dimension: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > dimension {
            return Err(Error::InvalidParameter(format!(
                "cannot split dimension {dimension} into {blocks} nonempty blocks"
            )));
        }
        let base = dimension / blocks;
        let extra = dimension % blocks;
        Self::new((0..blocks).map(|j| base + usize::from(j < extra)).collect())
    }

    pub fn single(dimension: usize) -> Result<Self> {
        Self::new(vec![dimension])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn dimension(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn range(&self, j: usize) -> Result<Range<usize>> {
        if j >= self.sizes.len() {
            return Err(Error::IndexOutOfRange {
                what: "block",
                index: j,
                count: self.sizes.len(),
            });
        }
        Ok(self.offsets[j]..self.offsets[j + 1])
    }
}

/// Smoothness constants: `Lᵢ` per component, the aggregate
/// `L = sqrt((1/n) Σ Lᵢ²)` and the block-wise constant `L̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothness {
    pub component: Vec<f64>,
    pub aggregate: f64,
    pub blockwise: f64,
}

impl Smoothness {
    pub fn new(component: Vec<f64>, blockwise: f64) -> Result<Self> {
        if component.is_empty() {
            return Err(Error::InvalidParameter("no component constants".into()));
        }
        if component
            .iter()
            .chain([&blockwise])
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "smoothness constants must be finite and nonnegative".into(),
            ));
        }
        let aggregate = (component.iter().map(|l| l * l).sum::<f64>() / component.len() as f64).sqrt();
        Ok(Self {
            component,
            aggregate,
            blockwise,
        })
    }
}

/// Which PIAG convergence regime applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexityFlag {
    Nonconvex,
    Convex,
    /// Proximal PL with constant `sigma`; `convex` records whether each
    /// component is also convex.
    ProximalPl {
        sigma: f64,
        convex: bool,
    },
}

impl ConvexityFlag {
    pub fn is_convex(&self) -> bool {
        matches!(
            self,
            ConvexityFlag::Convex | ConvexityFlag::ProximalPl { convex: true, .. }
        )
    }

    pub fn pl_sigma(&self) -> Option<f64> {
        match self {
            ConvexityFlag::ProximalPl { sigma, .. } => Some(*sigma),
            _ => None,
        }
    }
}

/// How an optimal value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimumSource {
    Analytic,
    ReferenceSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub point: Option<Vec<f64>>,
    pub source: OptimumSource,
}

/// The smooth part `f = (1/n) Σᵢ fᵢ`, exposed through per-component oracles.
///
/// Implementations must be deterministic: identical inputs give bit-identical
/// outputs.
pub trait SmoothPart: fmt::Debug + Send + Sync {
    fn n_components(&self) -> usize;

    fn dimension(&self) -> usize;

    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// Writes `∇fᵢ(x)` into `out`.
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]);

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.n_components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_components();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; x.len()];
        for i in 0..n {
            self.component_gradient_into(i, x, &mut buf);
            linalg::axpy(1.0, &buf, out);
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    /// Writes the coordinates `range` of `∇f(x)` into `out`.
    fn partial_gradient_into(&self, x: &[f64], range: Range<usize>, out: &mut [f64]) {
        let mut full = vec![0.0; x.len()];
        self.gradient_into(x, &mut full);
        out.copy_from_slice(&full[range]);
    }

    /// Valid upper bounds on `Lᵢ`, and `L̂` for the given partition.
    fn smoothness(&self, partition: &BlockPartition) -> Result<Smoothness>;
}

/// Smoothness constants for a concrete smooth part under a partition.
pub fn estimate_smoothness(smooth: &dyn SmoothPart, partition: &BlockPartition) -> Result<Smoothness> {
    if partition.dimension() != smooth.dimension() {
        return Err(Error::DimensionMismatch {
            expected: smooth.dimension(),
            got: partition.dimension(),
        });
    }
    smooth.smoothness(partition)
}

/// `P(x) = f(x) + r(x)`. Immutable once built.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothPart>,
    regularizer: Regularizer,
    partition: BlockPartition,
    smoothness: Smoothness,
    convexity: ConvexityFlag,
    optimum: Option<Optimum>,
}

impl CompositeProblem {
    pub fn new(
        smooth: Arc<dyn SmoothPart>,
        regularizer: Regularizer,
        partition: BlockPartition,
        convexity: ConvexityFlag,
    ) -> Result<Self> {
        let smoothness = estimate_smoothness(smooth.as_ref(), &partition)?;
        Self::with_smoothness(smooth, regularizer, partition, smoothness, convexity)
    }

    pub fn with_smoothness(
        smooth: Arc<dyn SmoothPart>,
        regularizer: Regularizer,
        partition: BlockPartition,
        smoothness: Smoothness,
        convexity: ConvexityFlag,
    ) -> Result<Self> {
        let d = smooth.dimension();
        if d == 0 || smooth.n_components() == 0 {
            return Err(Error::InvalidParameter("empty problem".into()));
        }
        if partition.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: partition.dimension(),
            });
        }
        if let Some(rd) = regularizer.fixed_dimension() {
            if rd != d {
                return Err(Error::DimensionMismatch { expected: d, got: rd });
            }
        }
        if smoothness.component.len() != smooth.n_components() {
            return Err(Error::DimensionMismatch {
                expected: smooth.n_components(),
                got: smoothness.component.len(),
            });
        }
        if let ConvexityFlag::ProximalPl { sigma, .. } = convexity {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "proximal PL constant must be positive, got {sigma}"
                )));
            }
        }
        Ok(Self {
            smooth,
            regularizer,
            partition,
            smoothness,
            convexity,
            optimum: None,
        })
    }

    pub fn with_optimum(mut self, optimum: Optimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn with_convexity(mut self, convexity: ConvexityFlag) -> Result<Self> {
        if let ConvexityFlag::ProximalPl { sigma, .. } = convexity {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "proximal PL constant must be positive, got {sigma}"
                )));
            }
        }
        self.convexity = convexity;
        Ok(self)
    }

    /// Same problem with a different block partition (constants recomputed).
    pub fn with_partition(&self, partition: BlockPartition) -> Result<Self> {
        let smoothness = estimate_smoothness(self.smooth.as_ref(), &partition)?;
        let mut p = Self::with_smoothness(
            self.smooth.clone(),
            self.regularizer.clone(),
            partition,
            smoothness,
            self.convexity,
        )?;
        p.optimum = self.optimum.clone();
        Ok(p)
    }

    pub fn smooth(&self) -> &dyn SmoothPart {
        self.smooth.as_ref()
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    pub fn convexity(&self) -> ConvexityFlag {
        self.convexity
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn n_components(&self) -> usize {
        self.smooth.n_components()
    }

    pub fn dimension(&self) -> usize {
        self.smooth.dimension()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `P(x) = (1/n) Σ fᵢ(x) + r(x)`.
    pub fn eval_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.smooth.value(x) + self.regularizer.value(x)?)
    }

    /// `P(x) − P*` when the optimum is known.
    pub fn objective_error(&self, x: &[f64]) -> Result<Option<f64>> {
        let p = self.eval_objective(x)?;
        Ok(self.optimum.as_ref().map(|o| p - o.value))
    }

    pub fn smooth_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.smooth.value(x))
    }

    /// `∇fᵢ(x)` for a 0-based component index.
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if i >= self.n_components() {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: i,
                count: self.n_components(),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.smooth.component_gradient_into(i, x, &mut out);
        Ok(out)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; x.len()];
        self.smooth.gradient_into(x, &mut out);
        Ok(out)
    }

    /// Block `j` of `∇f(x)` (0-based).
    pub fn block_partial_gradient(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let range = self.partition.range(j)?;
        let mut out = vec![0.0; range.len()];
        self.smooth.partial_gradient_into(x, range, &mut out);
        Ok(out)
    }

    /// `y* = prox_{r/s}(x − ∇f(x)/s)` for scale `s`, returning `(y*, ∇f(x))`.
    fn prox_gradient_point(&self, x: &[f64], scale: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothness constant must be positive, got {scale}"
            )));
        }
        let grad = self.gradient(x)?;
        let step = 1.0 / scale;
        let pre: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        let y = self.regularizer.prox(step, &pre)?;
        Ok((y, grad))
    }

    /// `P̂(x) = min_y ⟨∇f(x), y − x⟩ + (L/2)‖y − x‖² + r(y) − r(x)`, evaluated at
    /// its minimizer `y* = prox_{r/L}(x − ∇f(x)/L)` with the aggregate `L`.
    pub fn forward_backward_gap(&self, x: &[f64]) -> Result<f64> {
        let l = self.smoothness.aggregate;
        let (y, grad) = self.prox_gradient_point(x, l)?;
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let value = linalg::dot(&grad, &diff) + 0.5 * l * linalg::norm_sq(&diff) + self.regularizer.value(&y)?
            - self.regularizer.value(x)?;
        // y = x is feasible with value 0, so the minimum is never positive.
        Ok(value.min(0.0))
    }

    /// `∇̃P(x) = L̂ (prox_{r/L̂}(x − ∇f(x)/L̂) − x)`.
    pub fn prox_gradient_mapping(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lhat = self.smoothness.blockwise;
        let (y, _) = self.prox_gradient_point(x, lhat)?;
        Ok(y.iter().zip(x).map(|(a, b)| lhat * (a - b)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::quadratic::{build_quadratic_problem, QuadraticSmooth};
    use nalgebra::{DMatrix, DVector};

    fn half_norm_sq(d: usize, reg: Regularizer, sizes: Vec<usize>) -> CompositeProblem {
        build_quadratic_problem(
            DMatrix::identity(d, d),
            DVector::zeros(d),
            reg,
            BlockPartition::new(sizes).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn even_partition_puts_extras_first() {
        assert_eq!(BlockPartition::even(10, 4).unwrap().sizes(), &[3, 3, 2, 2]);
        assert_eq!(BlockPartition::even(28, 14).unwrap().sizes(), &[2; 14]);
        assert!(BlockPartition::even(3, 4).is_err());
        assert!(BlockPartition::new(vec![2, 0]).is_err());
    }

    #[test]
    fn aggregate_is_root_mean_square() {
        let s = Smoothness::new(vec![1.0, 2.0, 2.0], 1.0).unwrap();
        let expected = ((1.0 + 4.0 + 4.0) / 3.0f64).sqrt();
        assert!((s.aggregate - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn objective_examples() {
        let p = half_norm_sq(2, Regularizer::Zero, vec![2]);
        assert_eq!(p.eval_objective(&[0.0, 0.0]).unwrap(), 0.0);
        let p = half_norm_sq(2, Regularizer::l1(1.0).unwrap(), vec![2]);
        assert_eq!(p.eval_objective(&[1.0, -1.0]).unwrap(), 3.0);
        assert!(matches!(p.eval_objective(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_examples() {
        let p = half_norm_sq(2, Regularizer::Zero, vec![1, 1]);
        assert_eq!(p.component_gradient(0, &[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
        assert_eq!(p.block_partial_gradient(1, &[3.0, -2.0]).unwrap(), vec![-2.0]);
        assert!(p.block_partial_gradient(2, &[3.0, -2.0]).is_err());
        assert!(p.component_gradient(1, &[3.0, -2.0]).is_err());
    }

    #[test]
    fn block_gradients_concatenate_to_full_gradient() {
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 3.0 } else { 0.4 / (1.0 + (i + j) as f64) });
        let b = DVector::from_fn(5, |i, _| i as f64 - 2.0);
        let p = build_quadratic_problem(a, b, Regularizer::Zero, BlockPartition::new(vec![2, 1, 2]).unwrap()).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7, -0.1];
        let full = p.gradient(&x).unwrap();
        let cat: Vec<f64> = (0..3).flat_map(|j| p.block_partial_gradient(j, &x).unwrap()).collect();
        for (u, v) in full.iter().zip(&cat) {
            assert!((u - v).abs() <= 1e-14 * u.abs().max(1.0));
        }
    }

    #[test]
    fn separable_block_gradient_ignores_other_blocks() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let p = build_quadratic_problem(
            a,
            DVector::zeros(3),
            Regularizer::Zero,
            BlockPartition::new(vec![1, 2]).unwrap(),
        )
        .unwrap();
        let x = [1.0, 2.0, 3.0];
        let before = p.block_partial_gradient(0, &x).unwrap();
        let after = p.block_partial_gradient(0, &[1.0, -7.0, 42.0]).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn forward_backward_gap_examples() {
        let p = half_norm_sq(1, Regularizer::Zero, vec![1]);
        assert_eq!(p.forward_backward_gap(&[0.0]).unwrap(), 0.0);
        assert_eq!(p.forward_backward_gap(&[2.0]).unwrap(), -2.0);
    }

    #[test]
    fn prox_gradient_mapping_examples() {
        let p = half_norm_sq(1, Regularizer::Zero, vec![1]);
        assert_eq!(p.prox_gradient_mapping(&[2.0]).unwrap(), vec![-2.0]);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let p = build_quadratic_problem(
            a,
            DVector::from_vec(vec![1.0, 1.0]),
            Regularizer::Zero,
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        let x = [0.4, -0.3];
        let g = p.gradient(&x).unwrap();
        let m = p.prox_gradient_mapping(&x).unwrap();
        for (gi, mi) in g.iter().zip(&m) {
            assert!((gi + mi).abs() < 1e-15);
        }
    }

    #[test]
    fn problem_rejects_bad_sigma() {
        let smooth = Arc::new(QuadraticSmooth::single(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap());
        let r = CompositeProblem::new(
            smooth,
            Regularizer::Zero,
            BlockPartition::single(2).unwrap(),
            ConvexityFlag::ProximalPl {
                sigma: 0.0,
                convex: true,
            },
        );
        assert!(r.is_err());
    }
}
