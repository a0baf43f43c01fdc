//! Reference solve for `P*`: accelerated proximal gradient with step `1/L`
//! and gradient-based adaptive restart. Termination is judged by the plain
//! proximal-gradient residual at a momentum-free iterate.

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{CompositeProblem, Optimum, OptimumSource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Stop once `‖L (prox_{r/L}(x − ∇f(x)/L) − x)‖` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub point: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub fn reference_solve(
    problem: &CompositeProblem,
    x0: &[f64],
    options: &ReferenceOptions,
) -> Result<ReferenceSolution> {
    let l = problem.smoothness().aggregate;
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("reference solve needs L > 0".into()));
    }
    let step = 1.0 / l;
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0_f64;
    // `y == x`, so the residual below is measured at an actual iterate.
    let mut fresh = true;
    let mut pre = vec![0.0; x.len()];
    let mut next = vec![0.0; x.len()];
    for it in 0..=options.max_iterations {
        let grad = problem.gradient(&y)?;
        for ((p, yi), gi) in pre.iter_mut().zip(&y).zip(&grad) {
            *p = yi - step * gi;
        }
        problem.regularizer().prox_into(step, 0, &pre, &mut next);
        let residual = l * linalg::dist_sq(&next, &y).sqrt();
        if residual < options.tolerance && fresh {
            let value = problem.eval_objective(&next)?;
            return Ok(ReferenceSolution {
                point: next,
                value,
                residual,
                iterations: it,
            });
        }
        if it == options.max_iterations {
            return Err(Error::ReferenceSolveFailed {
                residual,
                iterations: it,
            });
        }
        let uphill: f64 = y
            .iter()
            .zip(&next)
            .zip(&x)
            .map(|((yi, ni), xi)| (yi - ni) * (ni - xi))
            .sum();
        if residual < options.tolerance || uphill > 0.0 {
            t = 1.0;
            x.copy_from_slice(&next);
            y.copy_from_slice(&next);
            fresh = true;
        } else {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            for ((yi, ni), xi) in y.iter_mut().zip(&next).zip(&x) {
                *yi = ni + beta * (ni - xi);
            }
            x.copy_from_slice(&next);
            t = t_next;
            fresh = beta == 0.0;
        }
    }
    unreachable!()
}

/// Solves from the origin and attaches the result as the problem's optimum.
pub fn with_reference_optimum(
    problem: CompositeProblem,
    options: &ReferenceOptions,
) -> Result<(CompositeProblem, ReferenceSolution)> {
    let x0 = vec![0.0; problem.dimension()];
    let sol = reference_solve(&problem, &x0, options)?;
    let opt = Optimum {
        value: sol.value,
        point: Some(sol.point.clone()),
        source: OptimumSource::ReferenceSolve,
    };
    Ok((problem.with_optimum(opt), sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::quadratic::build_quadratic_problem;
    use crate::problem::BlockPartition;
    use crate::prox::Regularizer;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_analytic_optimum() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let p = build_quadratic_problem(
            a,
            DVector::from_vec(vec![1.0, 0.0]),
            Regularizer::Zero,
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        let sol = reference_solve(&p, &[5.0, 5.0], &ReferenceOptions::default()).unwrap();
        assert!((sol.value + 0.5).abs() < 1e-15);
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn one_dimensional_lasso() {
        // ½(x − 3)² + |x| has minimizer 2.
        let p = build_quadratic_problem(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 3.0),
            Regularizer::l1(1.0).unwrap(),
            BlockPartition::single(1).unwrap(),
        )
        .unwrap();
        let sol = reference_solve(&p, &[0.0], &ReferenceOptions::default()).unwrap();
        assert!((sol.point[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_when_capped() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-3, 1.0]));
        let p = build_quadratic_problem(
            a,
            DVector::from_vec(vec![1.0, 1.0]),
            Regularizer::Zero,
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        let opts = ReferenceOptions {
            tolerance: 1e-10,
            max_iterations: 10,
        };
        assert!(matches!(
            reference_solve(&p, &[0.0, 0.0], &opts),
            Err(Error::ReferenceSolveFailed { .. })
        ));
    }
}
