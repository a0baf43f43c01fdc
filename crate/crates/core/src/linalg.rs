//! Dense vector helpers and a few numerics shared across modules.

use nalgebra::DMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Error-free transformation: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Running prefix sums kept as unevaluated pairs `hi + lo`, so differences of
/// prefixes keep roughly twice the working precision.
#[derive(Debug, Clone, Default)]
pub struct CompensatedPrefix {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl CompensatedPrefix {
    pub fn new<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut hi = vec![0.0];
        let mut lo = vec![0.0];
        let (mut h, mut l) = (0.0f64, 0.0f64);
        for v in values {
            let (s, e) = two_sum(h, v);
            l += e;
            let (s2, e2) = two_sum(s, l);
            h = s2;
            l = e2;
            hi.push(h);
            lo.push(l);
        }
        Self { hi, lo }
    }

    /// Number of summed values.
    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of values with indices in `start..end`.
    pub fn range_sum(&self, start: usize, end: usize) -> f64 {
        let (d, e) = two_sum(self.hi[end], -self.hi[start]);
        d + (e + (self.lo[end] - self.lo[start]))
    }
}

/// Largest singular value of `m` by power iteration on `mᵀm`.
///
/// Iterates until the relative change of the estimate drops below `rel_tol`.
pub fn spectral_norm(m: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    // Deterministic start with unequal weights so it is unlikely to be
    // orthogonal to the dominant singular vector.
    let mut v: nalgebra::DVector<f64> = nalgebra::DVector::from_fn(cols, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    let n0 = v.norm();
    v /= n0;
    let mut estimate = 0.0f64;
    for _ in 0..100_000 {
        let mv = m * &v;
        let w = m.transpose() * &mv;
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let next = mv.norm();
        v = w / wn;
        if estimate > 0.0 && ((next - estimate).abs() <= rel_tol * next) {
            return next.max(estimate);
        }
        estimate = next;
    }
    estimate
}
