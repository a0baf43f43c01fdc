//! Theoretical upper-bound curves and their comparison with run traces.
//!
//! | kind            | bound at `k` (with `S_k = Σ_{t<k} γ_t`)                     |
//! |-----------------|--------------------------------------------------------------|
//! | PIAG nonconvex  | `2(h²−h+1)(P₀−P*) / ((1−h) S_k)` on `min_{t≤k} ‖∇f+ξ‖²`      |
//! | PIAG convex     | `(P₀−P* + ‖x₀−x*‖²/(2a₀)) / (1 + S_k/a₀)`, `a₀ = h(h+1)/(L(1−h))` |
//! | PIAG proximal PL| `exp(−3βσ(1−h̃)/(4(h̃²−h̃+1)) S_k)(P₀−P*)`                      |
//! | BCD nonconvex   | `4m(P₀−P*) / ((1−h) S_k)` on `min_{t≤k} E‖∇̃P‖²`               |

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{neumaier_sum, CompensatedPrefix};
use crate::schedule::StepSizePolicy;
use crate::trace::{EngineKind, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    PiagNonconvex,
    PiagConvex,
    PiagPl,
    BcdNonconvex,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::PiagNonconvex => "piag_nonconvex",
            BoundKind::PiagConvex => "piag_convex",
            BoundKind::PiagPl => "piag_pl",
            BoundKind::BcdNonconvex => "bcd_nonconvex",
        }
    }

    pub fn engine(&self) -> EngineKind {
        match self {
            BoundKind::BcdNonconvex => EngineKind::Bcd,
            _ => EngineKind::Piag,
        }
    }

    /// Whether the bounded quantity is the running best of the stationarity
    /// column (otherwise the objective error).
    pub fn bounds_running_best(&self) -> bool {
        matches!(self, BoundKind::PiagNonconvex | BoundKind::BcdNonconvex)
    }
}

/// Where `Σ_{t<k} γ_t` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepsumSource {
    #[default]
    Exact,
    /// Closed-form lower bound of the schedule (requires a delay-matched policy).
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundConstants {
    /// `P(x_0) − P*`.
    pub initial_gap: Option<f64>,
    /// `‖x_0 − x*‖²`.
    pub dist_sq: Option<f64>,
    pub sigma: Option<f64>,
    /// Number of blocks `m`.
    pub blocks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BoundCurve {
    kind: BoundKind,
    policy: StepSizePolicy,
    constants: BoundConstants,
    source: StepsumSource,
}

fn require<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingConstant(name))
}

impl BoundCurve {
    /// `h` and the smoothness constant (`L` for PIAG, `L̂` for BCD) are taken
    /// from `policy`.
    pub fn new(
        kind: BoundKind,
        policy: StepSizePolicy,
        constants: BoundConstants,
        source: StepsumSource,
    ) -> Result<Self> {
        let gap = require(constants.initial_gap, "initial objective gap")?;
        if !(gap >= 0.0) || !gap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial gap must be finite and nonnegative, got {gap}"
            )));
        }
        match kind {
            BoundKind::PiagConvex => {
                let d = require(constants.dist_sq, "squared distance to the minimizer")?;
                if !(d >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "squared distance must be nonnegative, got {d}"
                    )));
                }
            }
            BoundKind::PiagPl => {
                let s = require(constants.sigma, "proximal-PL constant sigma")?;
                if !(s > 0.0) {
                    return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
                }
            }
            BoundKind::BcdNonconvex => {
                if require(constants.blocks, "number of blocks")? == 0 {
                    return Err(Error::InvalidParameter("number of blocks must be positive".into()));
                }
            }
            BoundKind::PiagNonconvex => {}
        }
        if source == StepsumSource::ClosedForm && policy.schedule_params().is_none() {
            return Err(Error::InvalidParameter(
                "closed-form step sums need a delay-matched schedule".into(),
            ));
        }
        Ok(Self {
            kind,
            policy,
            constants,
            source,
        })
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }

    pub fn policy(&self) -> &StepSizePolicy {
        &self.policy
    }

    pub fn constants(&self) -> &BoundConstants {
        &self.constants
    }

    pub fn source(&self) -> StepsumSource {
        self.source
    }

    fn gap(&self) -> f64 {
        self.constants.initial_gap.expect("validated")
    }

    /// `a₀ = h(h+1)/(L(1−h))`.
    pub fn a0(&self) -> f64 {
        let h = self.policy.h();
        h * (h + 1.0) / (self.policy.smoothness() * (1.0 - h))
    }

    /// `h̃ = (1+h)/2`.
    pub fn h_tilde(&self) -> f64 {
        (1.0 + self.policy.h()) / 2.0
    }

    /// `β = min(1, (1−h)/(2h) · L/σ)`; needs σ.
    pub fn beta(&self) -> Result<f64> {
        let sigma = require(self.constants.sigma, "proximal-PL constant sigma")?;
        let h = self.policy.h();
        Ok((((1.0 - h) / (2.0 * h)) * self.policy.smoothness() / sigma).min(1.0))
    }

    /// `3βσ(1−h̃)/(4(h̃²−h̃+1))`, the coefficient of `Σγ` in the PL exponent.
    pub fn pl_exponent(&self) -> Result<f64> {
        let sigma = require(self.constants.sigma, "proximal-PL constant sigma")?;
        let ht = self.h_tilde();
        Ok(3.0 * self.beta()? * sigma * (1.0 - ht) / (4.0 * (ht * ht - ht + 1.0)))
    }

    /// `exp(−κ · lim Σγ/φ(k))` with `κ` the PL exponent coefficient: a
    /// surrogate for the unspecified `λ` in the `O(λ^{φ(k)})` rate.
    pub fn lambda_diagnostic(&self) -> Result<f64> {
        Ok((-self.pl_exponent()? * self.policy.stepsum_rate()?).exp())
    }

    /// `Σ_{t<k} γ_t` from the configured source.
    pub fn stepsum(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(0.0);
        }
        match self.source {
            StepsumSource::Exact => Ok(neumaier_sum((0..k).map(|t| self.policy.step_size(t)))),
            StepsumSource::ClosedForm => self.policy.stepsum_lower_bound(k),
        }
    }

    /// Bound value for a given `S_k`.
    pub fn eval_at_stepsum(&self, s: f64) -> Result<f64> {
        let h = self.policy.h();
        let gap = self.gap();
        Ok(match self.kind {
            BoundKind::PiagNonconvex => 2.0 * (h * h - h + 1.0) * gap / ((1.0 - h) * s),
            BoundKind::PiagConvex => {
                let a0 = self.a0();
                (gap + self.constants.dist_sq.expect("validated") / (2.0 * a0)) / (1.0 + s / a0)
            }
            BoundKind::PiagPl => (-self.pl_exponent()? * s).exp() * gap,
            BoundKind::BcdNonconvex => 4.0 * self.constants.blocks.expect("validated") as f64 * gap / ((1.0 - h) * s),
        })
    }

    /// Bound at iteration `k`; the nonconvex curves are `+∞` at `k = 0`.
    pub fn eval(&self, k: usize) -> Result<f64> {
        self.eval_at_stepsum(self.stepsum(k)?)
    }

    /// Bound at `k = 0..=horizon` in O(horizon).
    pub fn eval_through(&self, horizon: usize) -> Result<Vec<f64>> {
        match self.source {
            StepsumSource::Exact => {
                let prefix = CompensatedPrefix::new((0..horizon).map(|t| self.policy.step_size(t)));
                (0..=horizon)
                    .map(|k| self.eval_at_stepsum(prefix.range_sum(0, k)))
                    .collect()
            }
            StepsumSource::ClosedForm => (0..=horizon).map(|k| self.eval(k)).collect(),
        }
    }

    /// CSV with columns `k,bound` for `k = 0..=horizon`.
    pub fn write_csv<W: Write>(&self, horizon: usize, writer: W) -> Result<()> {
        let values = self.eval_through(horizon)?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "bound"])?;
        for (k, v) in values.iter().enumerate() {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub kind: BoundKind,
    /// `exceeds[k]` is true when the empirical metric at record `k` is above the bound.
    pub exceeds: Vec<bool>,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// `max_k metric/bound` over records with a finite positive bound.
    pub max_ratio: f64,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Compares a trace against the curve built for the same configuration.
pub fn dominance_report(curve: &BoundCurve, trace: &RunTrace) -> Result<DominanceReport> {
    if trace.engine != curve.kind.engine() {
        return Err(Error::ConfigurationMismatch(format!(
            "{} bound applied to a {} trace",
            curve.kind.name(),
            trace.engine.name()
        )));
    }
    for (idx, r) in trace.records.iter().enumerate() {
        if r.k != idx {
            return Err(Error::ConfigurationMismatch(format!(
                "trace record {idx} has k = {}",
                r.k
            )));
        }
        let gamma = curve.policy.step_size(r.k);
        if r.gamma != gamma {
            return Err(Error::ConfigurationMismatch(format!(
                "step size at k = {} is {} in the trace but {} in the bound's schedule",
                r.k, r.gamma, gamma
            )));
        }
    }
    let horizon = trace.len().saturating_sub(1);
    let bounds = curve.eval_through(horizon)?;
    let mut exceeds = Vec::with_capacity(trace.len());
    let mut max_ratio = 0.0_f64;
    for (r, &b) in trace.records.iter().zip(&bounds) {
        let metric = if curve.kind.bounds_running_best() {
            r.running_best
        } else {
            r.objective_error.ok_or(Error::MissingConstant("optimal value P*"))?
        };
        exceeds.push(metric > b);
        if b.is_finite() && b > 0.0 {
            max_ratio = max_ratio.max(metric / b);
        }
    }
    let violations = exceeds.iter().filter(|&&e| e).count();
    let first_violation = exceeds.iter().position(|&e| e);
    Ok(DominanceReport {
        kind: curve.kind,
        exceeds,
        violations,
        first_violation,
        max_ratio,
    })
}
