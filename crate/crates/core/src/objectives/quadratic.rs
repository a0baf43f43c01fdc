//! Quadratic components `fᵢ(x) = ½ xᵀAᵢx − bᵢᵀx`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm};
use crate::problem::{BlockPartition, CompositeProblem, ConvexityFlag, Optimum, OptimumSource, SmoothPart, Smoothness};
use crate::prox::Regularizer;

const POWER_ITERATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Component {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadraticSmooth {
    components: Vec<Component>,
    mean_a: DMatrix<f64>,
    mean_b: DVector<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "quadratic matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "quadratic matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

// `out = A x` for column-major `A`.
fn matvec_into(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let n = a.nrows();
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            let col = &a.as_slice()[j * n..(j + 1) * n];
            linalg::axpy(xj, col, out);
        }
    }
}

fn quad_value(a: &DMatrix<f64>, b: &DVector<f64>, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    matvec_into(a, x, &mut ax);
    0.5 * linalg::dot(x, &ax) - linalg::dot(b.as_slice(), x)
}

impl QuadraticSmooth {
    pub fn new(components: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let Some((first, _)) = components.first() else {
            return Err(Error::InvalidParameter("need at least one quadratic component".into()));
        };
        let d = first.nrows();
        let mut mean_a = DMatrix::zeros(d, d);
        let mut mean_b = DVector::zeros(d);
        let mut parts = Vec::with_capacity(components.len());
        for (a, b) in components {
            check_symmetric(&a)?;
            if a.nrows() != d || b.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: if a.nrows() != d { a.nrows() } else { b.len() },
                });
            }
            mean_a += &a;
            mean_b += &b;
            parts.push(Component { a, b });
        }
        let n = parts.len() as f64;
        mean_a /= n;
        mean_b /= n;
        Ok(Self {
            components: parts,
            mean_a,
            mean_b,
        })
    }

    pub fn single(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    /// `Ā = (1/n) Σ Aᵢ`.
    pub fn mean_matrix(&self) -> &DMatrix<f64> {
        &self.mean_a
    }

    pub fn mean_linear(&self) -> &DVector<f64> {
        &self.mean_b
    }

    /// Eigenvalues of `Ā`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.mean_a.clone().symmetric_eigen();
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

impl SmoothPart for QuadraticSmooth {
    fn n_components(&self) -> usize {
        self.components.len()
    }

    fn dimension(&self) -> usize {
        self.mean_b.len()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.components[i];
        quad_value(&c.a, &c.b, x)
    }

    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let c = &self.components[i];
        matvec_into(&c.a, x, out);
        linalg::axpy(-1.0, c.b.as_slice(), out);
    }

    fn value(&self, x: &[f64]) -> f64 {
        quad_value(&self.mean_a, &self.mean_b, x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        matvec_into(&self.mean_a, x, out);
        linalg::axpy(-1.0, self.mean_b.as_slice(), out);
    }

    fn partial_gradient_into(&self, x: &[f64], range: Range<usize>, out: &mut [f64]) {
        // Ā is symmetric, so row r equals column r.
        let n = self.mean_a.nrows();
        for (o, r) in out.iter_mut().zip(range) {
            let col = &self.mean_a.as_slice()[r * n..(r + 1) * n];
            *o = linalg::dot(col, x) - self.mean_b[r];
        }
    }

    fn smoothness(&self, partition: &BlockPartition) -> Result<Smoothness> {
        let component = self
            .components
            .iter()
            .map(|c| spectral_norm(&c.a, POWER_ITERATION_TOL))
            .collect();
        let mut blockwise = 0.0f64;
        for i in 0..partition.len() {
            let ri = partition.range(i)?;
            for j in 0..partition.len() {
                let rj = partition.range(j)?;
                let sub = self
                    .mean_a
                    .view((ri.start, rj.start), (ri.len(), rj.len()))
                    .clone_owned();
                blockwise = blockwise.max(spectral_norm(&sub, POWER_ITERATION_TOL));
            }
        }
        Smoothness::new(component, blockwise)
    }
}

/// Builds `P(x) = (1/n) Σ (½ xᵀAᵢx − bᵢᵀx) + r(x)`.
///
/// When `Ā` is positive definite the problem is flagged proximal PL with
/// `σ = λ_min(Ā)`; when additionally `r ≡ 0` the minimizer `Ā⁻¹b̄` and the
/// optimal value are attached.
pub fn build_quadratic_components(
    components: Vec<(DMatrix<f64>, DVector<f64>)>,
    regularizer: Regularizer,
    partition: BlockPartition,
) -> Result<CompositeProblem> {
    let smooth = QuadraticSmooth::new(components)?;
    for c in &smooth.components {
        let eig = c.a.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min < -1e-10 * c.a.amax().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    let eigenvalues = smooth.eigenvalues();
    let lmin = eigenvalues[0];
    let lmax = *eigenvalues.last().unwrap();
    let convexity = if lmin > 1e-12 * lmax.max(f64::MIN_POSITIVE) {
        ConvexityFlag::ProximalPl {
            sigma: lmin,
            convex: true,
        }
    } else {
        ConvexityFlag::Convex
    };
    let analytic = if matches!(regularizer, Regularizer::Zero) && matches!(convexity, ConvexityFlag::ProximalPl { .. })
    {
        smooth.mean_a.clone().cholesky().map(|ch| {
            let x = ch.solve(&smooth.mean_b);
            let value = -0.5 * smooth.mean_b.dot(&x);
            Optimum {
                value,
                point: Some(x.as_slice().to_vec()),
                source: OptimumSource::Analytic,
            }
        })
    } else {
        None
    };
    let problem = CompositeProblem::new(Arc::new(smooth), regularizer, partition, convexity)?;
    Ok(match analytic {
        Some(opt) => problem.with_optimum(opt),
        None => problem,
    })
}

/// Single-component quadratic `½ xᵀAx − bᵀx + r(x)`.
pub fn build_quadratic_problem(
    a: DMatrix<f64>,
    b: DVector<f64>,
    regularizer: Regularizer,
    partition: BlockPartition,
) -> Result<CompositeProblem> {
    build_quadratic_components(vec![(a, b)], regularizer, partition)
}

/// Least-squares components `(1/(2Nᵢ)) ‖Mᵢx − yᵢ‖²` (constant dropped) from
/// contiguous row batches of a design matrix.
pub fn least_squares_components(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    n_batches: usize,
) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    let rows = design.nrows();
    if targets.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: targets.len(),
        });
    }
    if n_batches == 0 || n_batches > rows {
        return Err(Error::InvalidParameter(format!(
            "cannot split {rows} rows into {n_batches} batches"
        )));
    }
    let base = rows / n_batches;
    let extra = rows % n_batches;
    let mut start = 0;
    let mut out = Vec::with_capacity(n_batches);
    for i in 0..n_batches {
        let len = base + usize::from(i < extra);
        let m = design.rows(start, len);
        let y = targets.rows(start, len);
        let scale = 1.0 / len as f64;
        let a = (m.transpose() * m) * scale;
        // Exact symmetrization; the product is symmetric up to rounding.
        let a = (&a + a.transpose()) * 0.5;
        let b = (m.transpose() * y) * scale;
        out.push((a, b));
        start += len;
    }
    Ok(out)
}

/// Seeded synthetic regression data: Gaussian design, sparse planted signal,
/// small Gaussian noise.
pub fn synthesize_regression(rows: usize, dimension: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let design = DMatrix::from_fn(rows, dimension, |_, _| draw());
    let planted = DVector::from_fn(dimension, |j, _| if j % 5 == 0 { 1.0 + 0.1 * j as f64 } else { 0.0 });
    let noise = DVector::from_fn(rows, |_, _| 0.1 * draw());
    let targets = &design * planted + noise;
    (design, targets)
}
