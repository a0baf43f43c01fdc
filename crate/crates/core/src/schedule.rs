//! Step-size policies matched to the delay bound, and the window-sum
//! admissibility check `Σ_{t=k−τ_k}^{k} γ_t ≤ h/L`.

use crate::delay::DelayParams;
use crate::error::{Error, Result};
use crate::linalg::{neumaier_sum, CompensatedPrefix};

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// `γ_k = h / (L (a((k+c)/(1−a))^b + c + 1))` with the aggregate `L`.
    Piag(DelayParams),
    /// Same formula with the block-wise constant `L̂`.
    Bcd(DelayParams),
    Constant(f64),
    /// Explicit `γ_0, γ_1, …`; the last entry repeats past the end.
    Table(Vec<f64>),
}

/// A step-size rule together with `h ∈ (0,1)` and the smoothness constant
/// (`L` or `L̂`) it is admissible against.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizePolicy {
    kind: PolicyKind,
    h: f64,
    smoothness: f64,
}

impl StepSizePolicy {
    pub fn new(kind: PolicyKind, h: f64, smoothness: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidParameter(format!("h must lie in (0,1), got {h}")));
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smoothness constant must be positive, got {smoothness}"
            )));
        }
        match &kind {
            PolicyKind::Constant(g) if !(*g > 0.0 && g.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "constant step must be positive, got {g}"
                )))
            }
            PolicyKind::Table(t) if t.is_empty() || t.iter().any(|g| !(*g > 0.0 && g.is_finite())) => {
                return Err(Error::InvalidParameter(
                    "step table must be nonempty and positive".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { kind, h, smoothness })
    }

    pub fn piag(h: f64, l: f64, params: DelayParams) -> Result<Self> {
        Self::new(PolicyKind::Piag(params), h, l)
    }

    pub fn bcd(h: f64, lhat: f64, params: DelayParams) -> Result<Self> {
        Self::new(PolicyKind::Bcd(params), h, lhat)
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// `h/L` (or `h/L̂`).
    pub fn window_limit(&self) -> f64 {
        self.h / self.smoothness
    }

    /// Delay parameters of a delay-matched schedule.
    pub fn schedule_params(&self) -> Option<&DelayParams> {
        match &self.kind {
            PolicyKind::Piag(p) | PolicyKind::Bcd(p) => Some(p),
            _ => None,
        }
    }

    pub fn step_size(&self, k: usize) -> f64 {
        match &self.kind {
            PolicyKind::Piag(p) | PolicyKind::Bcd(p) => {
                let (a, b, c) = (p.a(), p.b(), p.c());
                let inner = ((k as f64 + c) / (1.0 - a)).powf(b);
                self.h / (self.smoothness * (a * inner + c + 1.0))
            }
            PolicyKind::Constant(g) => *g,
            PolicyKind::Table(t) => t[k.min(t.len() - 1)],
        }
    }

    pub fn step_sizes(&self, count: usize) -> Vec<f64> {
        (0..count).map(|k| self.step_size(k)).collect()
    }

    /// Closed-form lower bound on `Σ_{t=0}^{k−1} γ_t` for a delay-matched
    /// schedule (`k ≥ 1`):
    /// `γ_0 + h((k+c)^{1−b} − (1+c)^{1−b}) / (L(a(1−a)^{−b} + (c+1)^{1−b})(1−b))`
    /// for `b < 1` and `γ_0 + h ln((k+c)/(1+c)) / (L(a/(1−a) + 1))` for `b = 1`.
    pub fn stepsum_lower_bound(&self, k: usize) -> Result<f64> {
        let p = self
            .schedule_params()
            .ok_or_else(|| Error::InvalidParameter("closed-form step sum needs a delay-matched schedule".into()))?;
        if k == 0 {
            return Err(Error::InvalidParameter("closed-form step sum needs k >= 1".into()));
        }
        let (a, b, c) = (p.a(), p.b(), p.c());
        let (h, l) = (self.h, self.smoothness);
        let gamma0 = self.step_size(0);
        let kf = k as f64;
        let tail = if b < 1.0 {
            let e = 1.0 - b;
            h * ((kf + c).powf(e) - (1.0 + c).powf(e)) / (l * (a * (1.0 - a).powf(-b) + (c + 1.0).powf(e)) * e)
        } else {
            h * ((kf + c) / (1.0 + c)).ln() / (l * (a / (1.0 - a) + 1.0))
        };
        Ok(gamma0 + tail)
    }

    /// `lim Σγ/φ(k)` of the closed form: the coefficient of `φ(k)`.
    pub fn stepsum_rate(&self) -> Result<f64> {
        let p = self
            .schedule_params()
            .ok_or_else(|| Error::InvalidParameter("step-sum rate needs a delay-matched schedule".into()))?;
        let (a, b, c) = (p.a(), p.b(), p.c());
        let (h, l) = (self.h, self.smoothness);
        Ok(if b < 1.0 {
            h / (l * (a * (1.0 - a).powf(-b) + (c + 1.0).powf(1.0 - b)) * (1.0 - b))
        } else {
            h / (l * (a / (1.0 - a) + 1.0))
        })
    }
}

/// `k^{1−b}` for `b ∈ [0,1)`, `ln k` for `b = 1`.
pub fn phi(b: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("phi(k) is defined for k >= 1".into()));
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidParameter(format!("b must lie in [0,1], got {b}")));
    }
    let kf = k as f64;
    Ok(if b == 1.0 { kf.ln() } else { kf.powf(1.0 - b) })
}

/// Exact partial sums `S_k = Σ_{t=0}^{k−1} γ_t` for `k = 0..=count`.
pub fn exact_stepsums(policy: &StepSizePolicy, count: usize) -> Vec<f64> {
    let prefix = CompensatedPrefix::new((0..count).map(|k| policy.step_size(k)));
    (0..=count).map(|k| prefix.range_sum(0, k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Admissibility {
    Pass,
    Fail { k: usize, window_sum: f64, limit: f64 },
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        matches!(self, Admissibility::Pass)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            Admissibility::Pass => Ok(()),
            Admissibility::Fail { k, window_sum, limit } => Err(Error::Inadmissible { k, window_sum, limit }),
        }
    }
}

// Windows up to this length are summed term by term; longer ones use the
// double-word prefix sums.
const DIRECT_WINDOW: usize = 64;

/// Verifies `Σ_{t=k−τ_k}^{k} γ_t ≤ h/L` for `k = 0..=horizon`.
pub fn check_admissibility(policy: &StepSizePolicy, delays: &[usize], horizon: usize) -> Result<Admissibility> {
    if delays.len() <= horizon {
        return Err(Error::DelaysTooShort {
            len: delays.len(),
            needed: horizon + 1,
        });
    }
    let limit = policy.window_limit();
    let steps = policy.step_sizes(horizon + 1);
    let prefix = CompensatedPrefix::new(steps.iter().copied());
    for (k, &tau) in delays.iter().enumerate().take(horizon + 1) {
        if tau > k {
            return Err(Error::DelayBoundViolated { k, tau });
        }
        let start = k - tau;
        let window_sum = if tau < DIRECT_WINDOW {
            neumaier_sum(steps[start..=k].iter().copied())
        } else {
            prefix.range_sum(start, k + 1)
        };
        if window_sum > limit {
            return Ok(Admissibility::Fail { k, window_sum, limit });
        }
    }
    Ok(Admissibility::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{build_adversarial_delays, sample_stochastic_delays};

    fn params(a: f64, b: f64, c: f64) -> DelayParams {
        DelayParams::new(a, b, c).unwrap()
    }

    #[test]
    fn first_step_is_h_over_l_without_offset() {
        let p = StepSizePolicy::piag(0.7, 2.0, params(0.1, 0.6, 0.0)).unwrap();
        assert_eq!(p.step_size(0), 0.7 / 2.0);
    }

    #[test]
    fn bounded_delay_schedule_is_constant() {
        let p = StepSizePolicy::piag(0.5, 3.0, params(0.4, 0.0, 2.0)).unwrap();
        let expected = 0.5 / (3.0 * (0.4 + 2.0 + 1.0));
        for k in [0, 1, 10, 10_000] {
            assert!((p.step_size(k) - expected).abs() <= 1e-16);
        }
    }

    #[test]
    fn hand_evaluated_step() {
        let p = StepSizePolicy::piag(0.5, 1.0, params(0.5, 1.0, 0.0)).unwrap();
        assert!((p.step_size(1) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn policy_validation() {
        let dp = params(0.5, 1.0, 0.0);
        assert!(StepSizePolicy::piag(1.0, 1.0, dp).is_err());
        assert!(StepSizePolicy::piag(0.0, 1.0, dp).is_err());
        assert!(StepSizePolicy::piag(0.5, 0.0, dp).is_err());
        assert!(StepSizePolicy::new(PolicyKind::Constant(-1.0), 0.5, 1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        assert!((phi(0.5, 100).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(phi(0.0, 7).unwrap(), 7.0);
        assert_eq!(phi(1.0, 1).unwrap(), 0.0);
        assert!(phi(0.5, 0).is_err());
    }

    #[test]
    fn zero_delays_always_admissible() {
        let p = StepSizePolicy::piag(0.99, 1.5, params(0.3, 0.5, 1.0)).unwrap();
        assert!(check_admissibility(&p, &[0; 1001], 1000).unwrap().passed());
    }

    #[test]
    fn constant_step_with_full_delay_fails_at_one() {
        let p = StepSizePolicy::new(PolicyKind::Constant(0.5 / 2.0), 0.5, 2.0).unwrap();
        let delays: Vec<usize> = (0..20).collect();
        match check_admissibility(&p, &delays, 19).unwrap() {
            Admissibility::Fail { k, window_sum, limit } => {
                assert_eq!(k, 1);
                assert!((window_sum - 2.0 * limit).abs() < 1e-15);
            }
            Admissibility::Pass => panic!("expected failure"),
        }
    }

    #[test]
    fn matched_schedule_admissible_for_generated_delays() {
        for &(a, b, c) in &[(0.1, 1.0, 0.0), (0.5, 0.5, 1.0), (0.9, 1.0, 10.0), (0.9, 0.0, 0.0)] {
            let dp = params(a, b, c);
            let policy = StepSizePolicy::piag(0.99, 1.0, dp).unwrap();
            let adv = build_adversarial_delays(dp, 5000).unwrap();
            assert!(check_admissibility(&policy, adv.values(), 5000).unwrap().passed());
            let st = sample_stochastic_delays(dp, 5000, 1, 17).unwrap();
            assert!(check_admissibility(&policy, st.values(), 5000).unwrap().passed());
        }
    }

    #[test]
    fn long_windows_agree_with_direct_summation() {
        let dp = params(0.9, 1.0, 3.0);
        let policy = StepSizePolicy::piag(0.9, 1.0, dp).unwrap();
        let steps = policy.step_sizes(3001);
        let prefix = CompensatedPrefix::new(steps.iter().copied());
        for k in (0..=3000).step_by(37) {
            for start in (0..=k).step_by(53) {
                let direct = neumaier_sum(steps[start..=k].iter().copied());
                let fast = prefix.range_sum(start, k + 1);
                assert!((direct - fast).abs() <= 4.0 * f64::EPSILON * direct);
            }
        }
    }

    #[test]
    fn steps_are_nonincreasing() {
        for &(a, b, c) in &[(0.1, 0.2, 0.0), (0.5, 1.0, 3.0), (0.9, 0.6, 10.0), (0.3, 0.0, 1.0)] {
            let p = StepSizePolicy::piag(0.9, 2.0, params(a, b, c)).unwrap();
            let s = p.step_sizes(10_000);
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn lower_bound_examples() {
        let p = StepSizePolicy::piag(0.9, 1.3, params(0.2, 0.6, 2.0)).unwrap();
        assert_eq!(p.stepsum_lower_bound(1).unwrap(), p.step_size(0));
        assert!(p.stepsum_lower_bound(0).is_err());
        let c = StepSizePolicy::new(PolicyKind::Constant(0.1), 0.5, 1.0).unwrap();
        assert!(c.stepsum_lower_bound(3).is_err());
    }

    #[test]
    fn direct_sum_dominates_lower_bound() {
        for &(a, b, c) in &[
            (0.1, 0.2, 0.0),
            (0.5, 1.0, 0.0),
            (0.9, 0.6, 10.0),
            (0.3, 0.0, 1.0),
            (0.5, 0.5, 1.0),
        ] {
            let p = StepSizePolicy::piag(0.99, 1.0, params(a, b, c)).unwrap();
            let sums = exact_stepsums(&p, 10_000);
            for k in [10, 100, 1000, 10_000] {
                let lb = p.stepsum_lower_bound(k).unwrap();
                assert!(lb <= sums[k], "a={a} b={b} c={c} k={k}: {lb} > {}", sums[k]);
            }
        }
    }

    #[test]
    fn log_growth_for_linear_delays() {
        let p = StepSizePolicy::piag(0.5, 1.0, params(0.5, 1.0, 0.0)).unwrap();
        let coef = 0.5 / (0.5 / 0.5 + 1.0);
        for k in [10usize, 100] {
            let diff = p.stepsum_lower_bound(k * k).unwrap() - p.stepsum_lower_bound(k).unwrap();
            assert!((diff - coef * (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bound_grows_like_phi() {
        for &(a, b, c) in &[(0.1, 0.2, 0.0), (0.5, 1.0, 0.0), (0.9, 0.6, 10.0), (0.3, 0.0, 1.0)] {
            let p = StepSizePolicy::piag(0.99, 1.0, params(a, b, c)).unwrap();
            let ratios: Vec<f64> = (1..=6)
                .map(|j| {
                    let k = 10usize.pow(j);
                    p.stepsum_lower_bound(k).unwrap() / phi(b, k).unwrap()
                })
                .collect();
            let floor = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(floor > 0.0);
            // Ratios approach the coefficient of φ(k).
            let rate = p.stepsum_rate().unwrap();
            assert!((ratios[5] - rate).abs() < 0.5 * rate, "{ratios:?} vs {rate}");
        }
    }
}
