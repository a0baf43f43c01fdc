//! Reference implementations used to cross-check `asyncopt`: plain nalgebra
//! quadratics, the delay-matched step-size formula, compensated prefix sums
//! and a from-scratch PIAG loop.

use nalgebra::{DMatrix, DVector};

/// `f(x) = (1/n) Σ ½ xᵀAᵢx − bᵢᵀx` held as plain matrices.
pub struct Quad {
    pub comps: Vec<(DMatrix<f64>, DVector<f64>)>,
    pub abar: DMatrix<f64>,
    pub bbar: DVector<f64>,
}

impl Quad {
    pub fn new(comps: Vec<(DMatrix<f64>, DVector<f64>)>) -> Self {
        let n = comps.len() as f64;
        let d = comps[0].1.len();
        let mut abar = DMatrix::zeros(d, d);
        let mut bbar = DVector::zeros(d);
        for (a, b) in &comps {
            abar += a;
            bbar += b;
        }
        Self {
            comps,
            abar: abar / n,
            bbar: bbar / n,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.abar * x)) - self.bbar.dot(x)
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.abar * x - &self.bbar
    }

    pub fn component_grad(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.comps[i].0 * x - &self.comps[i].1
    }

    /// `sqrt(mean λ_max(Aᵢ)²)`.
    pub fn lipschitz(&self) -> f64 {
        let sq: f64 = self
            .comps
            .iter()
            .map(|(a, _)| a.clone().symmetric_eigen().eigenvalues.max().powi(2))
            .sum();
        (sq / self.comps.len() as f64).sqrt()
    }

    /// Largest spectral norm over the block submatrices of `Ā`.
    pub fn blockwise_lipschitz(&self, block: usize) -> f64 {
        let d = self.bbar.len();
        let mut best = 0.0f64;
        for i in (0..d).step_by(block) {
            for j in (0..d).step_by(block) {
                let sub = self.abar.view((i, j), (block, block)).clone_owned();
                best = best.max(sub.singular_values().max());
            }
        }
        best
    }

    pub fn lambda_min(&self) -> f64 {
        self.abar.clone().symmetric_eigen().eigenvalues.min()
    }
}

pub fn soft(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

pub fn l1(x: &DVector<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn matched_steps(h: f64, l: f64, (a, b, c): (f64, f64, f64), count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let growth = if b == 0.0 {
                a
            } else {
                a * ((k as f64 + c) / (1.0 - a)).powf(b)
            };
            h / (l * (growth + c + 1.0))
        })
        .collect()
}

/// `out[k] = Σ_{t<k} v[t]` with Neumaier compensation.
pub fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    out.push(0.0);
    for &x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// PIAG on `f + λ‖·‖₁`, rebuilt from the definition; `delay(i, k)` is the
/// staleness of component `i` at step `k`. Returns `P(x_k) − P*` and
/// `‖∇f(x_k) + ξ_k‖²` for `k = 0..=horizon`.
pub fn piag_oracle(
    quad: &Quad,
    lambda: f64,
    delay: impl Fn(usize, usize) -> usize,
    steps: &[f64],
    x0: &DVector<f64>,
    horizon: usize,
    pstar: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = quad.comps.len();
    let objective = |x: &DVector<f64>| quad.value(x) + lambda * l1(x) - pstar;
    let mut xs = vec![x0.clone()];
    let mut sources = vec![0usize; n];
    let mut table: Vec<DVector<f64>> = (0..n).map(|i| quad.component_grad(i, x0)).collect();
    let g0 = quad.grad(x0);
    // Minimum-norm element of ∇f(x₀) + ∂(λ‖·‖₁)(x₀).
    let r0 = DVector::from_fn(x0.len(), |j, _| {
        if x0[j] != 0.0 {
            g0[j] + lambda * x0[j].signum()
        } else {
            g0[j].signum() * (g0[j].abs() - lambda).max(0.0)
        }
    });
    let mut errors = vec![objective(x0)];
    let mut stat = vec![r0.norm_squared()];
    for k in 0..horizon {
        for (i, src) in sources.iter_mut().enumerate() {
            let s = k - delay(i, k);
            if s != *src {
                table[i] = quad.component_grad(i, &xs[s]);
                *src = s;
            }
        }
        let g = table.iter().fold(DVector::zeros(x0.len()), |acc, t| acc + t) / n as f64;
        let v = &xs[k] - steps[k] * g;
        let next = soft(&v, steps[k] * lambda);
        let xi = (&v - &next) / steps[k];
        errors.push(objective(&next));
        stat.push((quad.grad(&next) + xi).norm_squared());
        xs.push(next);
    }
    (errors, stat)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
