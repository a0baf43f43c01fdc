use asyncopt::linalg::{dot, norm, norm_sq};
use asyncopt::objectives::data::synthesize_classification;
use asyncopt::objectives::logistic::{build_logistic_problem, LogisticSpec};
use asyncopt::objectives::quadratic::{
    build_quadratic_components, build_quadratic_problem, least_squares_components, synthesize_regression,
};
use asyncopt::problem::{BlockPartition, CompositeProblem};
use asyncopt::prox::Regularizer;
use asyncopt::reference::{with_reference_optimum, ReferenceOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v = gaussian(rng, d, 1.0);
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

fn logistic(lambda1: f64, lambda2: f64, blocks: usize) -> CompositeProblem {
    let data = synthesize_classification(120, 12, 0.5, 3).unwrap();
    let spec = LogisticSpec {
        lambda1,
        lambda2,
        n_batches: 4,
        shuffle_seed: 9,
        n_blocks: blocks,
    };
    build_logistic_problem(&data, &spec).unwrap()
}

fn lasso(lambda1: f64, blocks: usize) -> CompositeProblem {
    let (m, y) = synthesize_regression(80, 10, 5);
    let comps = least_squares_components(&m, &y, 4).unwrap();
    build_quadratic_components(
        comps,
        Regularizer::l1(lambda1).unwrap(),
        BlockPartition::even(10, blocks).unwrap(),
    )
    .unwrap()
}

fn strongly_convex_quadratic(reg: Regularizer) -> CompositeProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let q = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q();
    let eig = DVector::from_vec(vec![0.5, 1.0, 2.0, 3.0, 5.0, 8.0]);
    let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let b = DVector::from_fn(6, |i, _| i as f64 - 2.0);
    build_quadratic_problem(a, b, reg, BlockPartition::even(6, 3).unwrap()).unwrap()
}

fn component_value(p: &CompositeProblem, i: usize, x: &[f64]) -> f64 {
    p.smooth().component_value(i, x)
}

#[test]
fn component_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in [logistic(0.0, 0.01, 1), lasso(0.0, 1)] {
        let d = p.dimension();
        for _ in 0..100 {
            let x = gaussian(&mut rng, d, 1.0);
            for i in 0..p.n_components() {
                let g = p.component_gradient(i, &x).unwrap();
                let step = 1e-6;
                let fd: Vec<f64> = (0..d)
                    .map(|j| {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += step;
                        xm[j] -= step;
                        (component_value(&p, i, &xp) - component_value(&p, i, &xm)) / (2.0 * step)
                    })
                    .collect();
                let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                assert!(
                    norm(&err) <= 1e-4 * norm(&g).max(1e-3),
                    "component {i}: {g:?} vs {fd:?}"
                );
            }
        }
    }
}

#[test]
fn component_smoothness_constants_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in [logistic(0.0, 0.01, 1), lasso(0.0, 1)] {
        let d = p.dimension();
        let ls = p.smoothness().component.clone();
        for _ in 0..1000 {
            let x = gaussian(&mut rng, d, 2.0);
            let h = unit(&mut rng, d);
            for t in [1e-3, 1.0, 10.0] {
                let y: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + t * b).collect();
                for (i, &li) in ls.iter().enumerate() {
                    let gx = p.component_gradient(i, &x).unwrap();
                    let gy = p.component_gradient(i, &y).unwrap();
                    let diff: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
                    assert!(norm(&diff) <= li * t * (1.0 + 1e-9), "L_{i} = {li} violated at t = {t}");
                }
            }
        }
    }
}

#[test]
fn blockwise_smoothness_constant_is_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in [logistic(0.0, 0.01, 4), lasso(0.0, 5)] {
        let part = p.partition().clone();
        let lhat = p.smoothness().blockwise;
        for _ in 0..300 {
            let x = gaussian(&mut rng, p.dimension(), 2.0);
            for j in 0..part.len() {
                let range = part.range(j).unwrap();
                let hj = gaussian(&mut rng, range.len(), 3.0);
                let mut y = x.clone();
                for (k, v) in range.clone().zip(&hj) {
                    y[k] += v;
                }
                for i in 0..part.len() {
                    let gx = p.block_partial_gradient(i, &x).unwrap();
                    let gy = p.block_partial_gradient(i, &y).unwrap();
                    let diff: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
                    assert!(norm(&diff) <= lhat * norm(&hj) * (1.0 + 1e-9));
                }
            }
        }
    }
}

#[test]
fn forward_backward_gap_is_nonpositive_and_vanishes_at_fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [logistic(0.05, 0.01, 1), lasso(0.1, 1)] {
        for _ in 0..500 {
            let x = gaussian(&mut rng, p.dimension(), 1.0);
            assert!(p.forward_backward_gap(&x).unwrap() <= 0.0);
        }
        let (p, sol) = with_reference_optimum(p, &ReferenceOptions::default()).unwrap();
        assert!(p.forward_backward_gap(&sol.point).unwrap().abs() <= 1e-10);
        assert!(norm(&p.prox_gradient_mapping(&sol.point).unwrap()) <= 1e-8);
    }
}

#[test]
fn proximal_pl_flags_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let problems = [
        strongly_convex_quadratic(Regularizer::Zero),
        strongly_convex_quadratic(Regularizer::l1(0.3).unwrap()),
        logistic(1e-3, 0.05, 1),
    ];
    for p in problems {
        let sigma = p.convexity().pl_sigma().expect("flagged proximal PL");
        let (p, _) = with_reference_optimum(p, &ReferenceOptions::default()).unwrap();
        let l = p.smoothness().aggregate;
        for _ in 0..1000 {
            let x = gaussian(&mut rng, p.dimension(), 2.0);
            let lhs = sigma * p.objective_error(&x).unwrap().unwrap();
            let rhs = -l * p.forward_backward_gap(&x).unwrap();
            assert!(
                lhs <= rhs * (1.0 + 1e-9) + 1e-12,
                "sigma (P - P*) = {lhs} > -L P_hat = {rhs}"
            );
        }
    }
}

#[test]
fn strongly_convex_quadratic_sigma_is_smallest_eigenvalue() {
    let p = strongly_convex_quadratic(Regularizer::Zero);
    assert!((p.convexity().pl_sigma().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn reference_solution_of_planted_classifier_is_accurate() {
    let data = synthesize_classification(200, 50, 0.1, 7).unwrap();
    let spec = LogisticSpec {
        lambda1: 1e-5,
        lambda2: 1e-4,
        n_batches: 10,
        shuffle_seed: 1,
        n_blocks: 1,
    };
    let p = build_logistic_problem(&data, &spec).unwrap();
    let (_, sol) = with_reference_optimum(p, &ReferenceOptions::default()).unwrap();
    let correct = data
        .samples
        .iter()
        .filter(|s| s.label * s.dot(&sol.point) > 0.0)
        .count();
    assert!(
        correct as f64 / data.len() as f64 > 0.8,
        "accuracy {}",
        correct as f64 / data.len() as f64
    );
}

#[test]
fn full_gradient_is_component_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for p in [logistic(0.0, 0.01, 1), lasso(0.0, 1)] {
        let x = gaussian(&mut rng, p.dimension(), 1.0);
        let g = p.gradient(&x).unwrap();
        let n = p.n_components();
        let mut mean = vec![0.0; p.dimension()];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(p.component_gradient(i, &x).unwrap()) {
                *m += v / n as f64;
            }
        }
        let diff: Vec<f64> = g.iter().zip(&mean).map(|(a, b)| a - b).collect();
        assert!(norm_sq(&diff) <= 1e-24 * norm_sq(&g).max(1.0));
        let f: f64 = (0..n).map(|i| component_value(&p, i, &x)).sum::<f64>() / n as f64;
        assert!((p.smooth_value(&x).unwrap() - f).abs() <= 1e-12 * f.abs().max(1.0));
        assert!(dot(&g, &g) >= 0.0);
    }
}
