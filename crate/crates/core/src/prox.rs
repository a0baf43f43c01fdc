//! Regularizer catalog and proximal operators.
//!
//! Every regularizer here is convex and closed, and all but the per-block list
//! are coordinate-wise, so the proximal map is available in closed form.

use crate::error::{Error, Result};
use crate::problem::BlockPartition;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `lambda * ‖x‖₁`
    L1 {
        lambda: f64,
    },
    /// Indicator of the box `lo ≤ x ≤ hi`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// One regularizer per block, with the block sizes it was built for.
    Separable {
        blocks: Vec<Regularizer>,
        sizes: Vec<usize>,
    },
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "prox step must be positive, got {gamma}"
        )))
    }
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "l1 weight must be nonnegative, got {lambda}"
            )));
        }
        Ok(Regularizer::L1 { lambda })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if let Some(i) = lo.iter().zip(&hi).position(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter(format!(
                "box bounds cross at coordinate {i}: lo = {}, hi = {}",
                lo[i], hi[i]
            )));
        }
        Ok(Regularizer::Box { lo, hi })
    }

    pub fn separable(blocks: Vec<Regularizer>, sizes: Vec<usize>) -> Result<Self> {
        if blocks.len() != sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len(),
                got: blocks.len(),
            });
        }
        for (reg, &size) in blocks.iter().zip(&sizes) {
            if matches!(reg, Regularizer::Separable { .. }) {
                return Err(Error::InvalidParameter(
                    "nested per-block regularizers are not supported".into(),
                ));
            }
            if let Some(d) = reg.fixed_dimension() {
                if d != size {
                    return Err(Error::DimensionMismatch { expected: size, got: d });
                }
            }
        }
        Ok(Regularizer::Separable { blocks, sizes })
    }

    /// Dimension the regularizer is tied to, if any.
    pub fn fixed_dimension(&self) -> Option<usize> {
        match self {
            Regularizer::Zero | Regularizer::L1 { .. } => None,
            Regularizer::Box { lo, .. } => Some(lo.len()),
            Regularizer::Separable { sizes, .. } => Some(sizes.iter().sum()),
        }
    }

    /// Whether `r(x) = Σ_j r_j(x_j)` holds for the given partition.
    pub fn is_separable_under(&self, partition: &BlockPartition) -> bool {
        match self {
            Regularizer::Separable { sizes, .. } => sizes.as_slice() == partition.sizes(),
            _ => true,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        match self.fixed_dimension() {
            Some(d) if d != len => Err(Error::DimensionMismatch { expected: d, got: len }),
            _ => Ok(()),
        }
    }

    /// `r(x)`; `+∞` outside the domain.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.value_at(0, x))
    }

    // Value on coordinates `offset..offset + x.len()`.
    fn value_at(&self, offset: usize, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .enumerate()
                    .all(|(i, &v)| lo[offset + i] <= v && v <= hi[offset + i]);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Separable { blocks, sizes } => {
                let mut start = 0;
                let mut total = 0.0;
                for (reg, &size) in blocks.iter().zip(sizes) {
                    total += reg.value_at(0, &x[start..start + size]);
                    start += size;
                }
                total
            }
        }
    }

    /// Minimizer of `γ·r(y) + ½‖y − v‖²`.
    pub fn prox(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        self.check_dim(v.len())?;
        let mut out = vec![0.0; v.len()];
        self.prox_into(gamma, 0, v, &mut out);
        Ok(out)
    }

    /// Block-restricted prox for block `j` of `partition`.
    pub fn prox_block(&self, gamma: f64, partition: &BlockPartition, j: usize, v: &[f64]) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        let range = partition.range(j)?;
        if v.len() != range.len() {
            return Err(Error::DimensionMismatch {
                expected: range.len(),
                got: v.len(),
            });
        }
        if !self.is_separable_under(partition) {
            return Err(Error::NonSeparable);
        }
        let mut out = vec![0.0; v.len()];
        self.prox_block_into(gamma, partition, j, v, &mut out);
        Ok(out)
    }

    /// Unchecked block prox; callers have validated separability and sizes.
    pub(crate) fn prox_block_into(&self, gamma: f64, partition: &BlockPartition, j: usize, v: &[f64], out: &mut [f64]) {
        match self {
            Regularizer::Separable { blocks, .. } => blocks[j].prox_into(gamma, 0, v, out),
            _ => self.prox_into(gamma, partition.offset(j), v, out),
        }
    }

    pub(crate) fn prox_into(&self, gamma: f64, offset: usize, v: &[f64], out: &mut [f64]) {
        match self {
            Regularizer::Zero => out.copy_from_slice(v),
            Regularizer::L1 { lambda } => {
                let t = gamma * lambda;
                for (o, &vi) in out.iter_mut().zip(v) {
                    *o = soft_threshold(vi, t);
                }
            }
            Regularizer::Box { lo, hi } => {
                for (i, (o, &vi)) in out.iter_mut().zip(v).enumerate() {
                    *o = vi.clamp(lo[offset + i], hi[offset + i]);
                }
            }
            Regularizer::Separable { blocks, sizes } => {
                let mut start = 0;
                for (reg, &size) in blocks.iter().zip(sizes) {
                    let end = start + size;
                    reg.prox_into(gamma, 0, &v[start..end], &mut out[start..end]);
                    start = end;
                }
            }
        }
    }

    /// Subgradient `ξ = (pre − post)/γ ∈ ∂r(post)` certified by the optimality
    /// condition of the prox step that mapped `pre` to `post`.
    pub fn recover_subgradient(&self, gamma: f64, pre_prox: &[f64], post_prox: &[f64]) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        if pre_prox.len() != post_prox.len() {
            return Err(Error::DimensionMismatch {
                expected: pre_prox.len(),
                got: post_prox.len(),
            });
        }
        Ok(pre_prox.iter().zip(post_prox).map(|(a, b)| (a - b) / gamma).collect())
    }

    /// `grad + ξ` for the `ξ ∈ ∂r(x)` of least norm, i.e. the minimum-norm
    /// element of `∇f(x) + ∂r(x)`.
    pub fn min_norm_residual(&self, grad: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.min_norm_residual_at(0, grad, x, &mut out);
        out
    }

    fn min_norm_residual_at(&self, offset: usize, grad: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Regularizer::Zero => out.copy_from_slice(grad),
            Regularizer::L1 { lambda } => {
                for ((o, &g), &xi) in out.iter_mut().zip(grad).zip(x) {
                    *o = if xi > 0.0 {
                        g + lambda
                    } else if xi < 0.0 {
                        g - lambda
                    } else {
                        soft_threshold(g, *lambda)
                    };
                }
            }
            Regularizer::Box { lo, hi } => {
                for (i, ((o, &g), &xi)) in out.iter_mut().zip(grad).zip(x).enumerate() {
                    let (l, h) = (lo[offset + i], hi[offset + i]);
                    *o = if l == h {
                        0.0
                    } else if xi <= l {
                        g.min(0.0)
                    } else if xi >= h {
                        g.max(0.0)
                    } else {
                        g
                    };
                }
            }
            Regularizer::Separable { blocks, sizes } => {
                let mut start = 0;
                for (reg, &size) in blocks.iter().zip(sizes) {
                    let end = start + size;
                    reg.min_norm_residual_at(0, &grad[start..end], &x[start..end], &mut out[start..end]);
                    start = end;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn partition(sizes: &[usize]) -> BlockPartition {
        BlockPartition::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn zero_prox_is_identity() {
        let r = Regularizer::Zero;
        assert_eq!(r.prox(3.0, &[5.0, -3.0]).unwrap(), vec![5.0, -3.0]);
    }

    #[test]
    fn l1_prox_soft_thresholds() {
        let r = Regularizer::l1(2.0).unwrap();
        assert_eq!(r.prox(0.5, &[2.0, -0.5, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn l1_tie_maps_to_zero() {
        let r = Regularizer::l1(1.0).unwrap();
        assert_eq!(r.prox(1.0, &[1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn box_prox_clamps() {
        let r = Regularizer::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(r.prox(0.7, &[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        let r = Regularizer::Zero;
        assert!(r.prox(0.0, &[1.0]).is_err());
        assert!(r.prox(-1.0, &[1.0]).is_err());
        assert!(r.recover_subgradient(0.0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn crossed_box_bounds_are_rejected() {
        assert!(Regularizer::boxed(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn box_value_is_infinite_outside() {
        let r = Regularizer::boxed(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(r.value(&[0.5]).unwrap(), 0.0);
        assert_eq!(r.value(&[1.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn l1_block_prox_of_small_entry_is_zero() {
        let r = Regularizer::l1(1.0).unwrap();
        let p = partition(&[1, 1]);
        assert_eq!(r.prox_block(0.1, &p, 1, &[0.05]).unwrap(), vec![0.0]);
        let z = Regularizer::Zero;
        assert_eq!(z.prox_block(0.1, &p, 0, &[0.05]).unwrap(), vec![0.05]);
    }

    #[test]
    fn mismatched_per_block_list_is_not_separable() {
        let r = Regularizer::separable(vec![Regularizer::Zero, Regularizer::l1(1.0).unwrap()], vec![2, 2]).unwrap();
        let p = partition(&[1, 3]);
        assert!(matches!(r.prox_block(1.0, &p, 0, &[1.0]), Err(Error::NonSeparable)));
    }

    #[test]
    fn block_prox_composes_to_full_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = partition(&[3, 2, 2]);
        let regs = vec![
            Regularizer::Zero,
            Regularizer::l1(0.3).unwrap(),
            Regularizer::boxed(vec![-0.5; 7], vec![0.25; 7]).unwrap(),
            Regularizer::separable(
                vec![
                    Regularizer::l1(0.1).unwrap(),
                    Regularizer::Zero,
                    Regularizer::boxed(vec![0.0, -1.0], vec![1.0, 0.0]).unwrap(),
                ],
                vec![3, 2, 2],
            )
            .unwrap(),
        ];
        for reg in &regs {
            for _ in 0..50 {
                let v: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
                let gamma = rng.random_range(0.01..3.0);
                let full = reg.prox(gamma, &v).unwrap();
                let mut composed = Vec::new();
                for j in 0..p.len() {
                    let r = p.range(j).unwrap();
                    composed.extend(reg.prox_block(gamma, &p, j, &v[r]).unwrap());
                }
                assert_eq!(full, composed);
            }
        }
    }

    #[test]
    fn recovered_subgradient_examples() {
        let z = Regularizer::Zero;
        let post = z.prox(0.3, &[1.0, 2.0]).unwrap();
        assert_eq!(z.recover_subgradient(0.3, &[1.0, 2.0], &post).unwrap(), vec![0.0, 0.0]);

        // gamma * lambda = 1 with lambda = 1
        let l1 = Regularizer::l1(1.0).unwrap();
        let post = l1.prox(1.0, &[2.0]).unwrap();
        assert_eq!(post, vec![1.0]);
        assert_eq!(l1.recover_subgradient(1.0, &[2.0], &post).unwrap(), vec![1.0]);

        let b = Regularizer::boxed(vec![0.0], vec![1.0]).unwrap();
        let post = b.prox(0.5, &[0.4]).unwrap();
        assert_eq!(b.recover_subgradient(0.5, &[0.4], &post).unwrap(), vec![0.0]);
    }

    #[test]
    fn recovered_subgradient_satisfies_subgradient_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let regs = [
            Regularizer::l1(0.7).unwrap(),
            Regularizer::boxed(vec![-1.0; 4], vec![0.5; 4]).unwrap(),
            Regularizer::Zero,
        ];
        for reg in &regs {
            for _ in 0..20 {
                let pre: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let gamma = rng.random_range(0.05..2.0);
                let post = reg.prox(gamma, &pre).unwrap();
                let xi = reg.recover_subgradient(gamma, &pre, &post).unwrap();
                let r_post = reg.value(&post).unwrap();
                for _ in 0..100 {
                    let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                    let r_y = reg.value(&y).unwrap();
                    let lin: f64 = xi.iter().zip(&y).zip(&post).map(|((s, yi), xi)| s * (yi - xi)).sum();
                    assert!(r_y >= r_post + lin - 1e-10, "{reg:?}");
                }
            }
        }
    }

    #[test]
    fn min_norm_residual_l1() {
        let r = Regularizer::l1(1.0).unwrap();
        let res = r.min_norm_residual(&[0.5, 2.0, -3.0, 0.1], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(res, vec![0.0, 1.0, -2.0, 1.1]);
    }

    proptest! {
        #[test]
        fn prox_is_nonexpansive(
            u in proptest::collection::vec(-10.0f64..10.0, 5),
            v in proptest::collection::vec(-10.0f64..10.0, 5),
            gamma in 1e-3f64..10.0,
            lambda in 0.0f64..3.0,
        ) {
            let regs = [
                Regularizer::Zero,
                Regularizer::l1(lambda).unwrap(),
                Regularizer::boxed(vec![-1.0; 5], vec![2.0; 5]).unwrap(),
            ];
            for reg in &regs {
                let pu = reg.prox(gamma, &u).unwrap();
                let pv = reg.prox(gamma, &v).unwrap();
                let lhs = crate::linalg::dist_sq(&pu, &pv).sqrt();
                let rhs = crate::linalg::dist_sq(&u, &v).sqrt();
                prop_assert!(lhs <= rhs * (1.0 + 1e-15) + 1e-15);
            }
        }

        #[test]
        fn tiny_step_prox_approaches_identity(
            v in proptest::collection::vec(-10.0f64..10.0, 6),
            lambda in 0.0f64..5.0,
        ) {
            // l1 is lambda*sqrt(d)-Lipschitz in the Euclidean norm.
            let gamma = 1e-12;
            let reg = Regularizer::l1(lambda).unwrap();
            let p = reg.prox(gamma, &v).unwrap();
            let moved = crate::linalg::dist_sq(&p, &v).sqrt();
            prop_assert!(moved <= gamma * lambda * (v.len() as f64).sqrt() * (1.0 + 1e-9) + f64::EPSILON * crate::linalg::norm(&v));
        }
    }
}
