//! Deterministic replay of PIAG: a table of per-component gradients, each
//! computed at a historical iterate, averaged into `g_k` and followed by the
//! prox step `x_{k+1} = prox_{γ_k r}(x_k − γ_k g_k)`.
//!
//! Asynchrony is replayed from a delay table: slot `i` at step `k` holds
//! `∇fᵢ(x_{k−τ_k⁽ⁱ⁾})`, and a component "arrives" whenever the iterate its slot
//! refers to changes.

use crate::delay::{validate_assumption1, Conformance, DelaySequence};
use crate::error::{Error, Result};
use crate::history::IterateHistory;
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::schedule::{check_admissibility, StepSizePolicy};
use crate::trace::{EngineKind, RunTrace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run even when the step-size policy fails the admissibility check.
    pub override_admissibility: bool,
}

#[derive(Debug, Clone)]
pub struct PiagState<'p> {
    problem: &'p CompositeProblem,
    k: usize,
    x: Vec<f64>,
    history: IterateHistory,
    table: Vec<Vec<f64>>,
    sources: Vec<usize>,
    aggregate: Vec<f64>,
    subgradient: Option<Vec<f64>>,
}

impl<'p> PiagState<'p> {
    /// Initializes every slot with `∇fᵢ(x_0)`. `history` is the number of past
    /// iterates retained (max delay + 1).
    pub fn new(problem: &'p CompositeProblem, x0: &[f64], history: usize) -> Result<Self> {
        if x0.len() != problem.dimension() {
            return Err(Error::DimensionMismatch {
                expected: problem.dimension(),
                got: x0.len(),
            });
        }
        let n = problem.n_components();
        let table: Vec<Vec<f64>> = (0..n)
            .map(|i| problem.component_gradient(i, x0))
            .collect::<Result<_>>()?;
        let mut state = Self {
            problem,
            k: 0,
            x: x0.to_vec(),
            history: IterateHistory::new(x0, history),
            table,
            sources: vec![0; n],
            aggregate: vec![0.0; x0.len()],
            subgradient: None,
        };
        state.recompute_aggregate();
        Ok(state)
    }

    fn recompute_aggregate(&mut self) {
        self.aggregate.iter_mut().for_each(|v| *v = 0.0);
        for g in &self.table {
            linalg::axpy(1.0, g, &mut self.aggregate);
        }
        let inv = 1.0 / self.table.len() as f64;
        self.aggregate.iter_mut().for_each(|v| *v *= inv);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// Iterate index each slot was last computed at.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// `ξ_k ∈ ∂r(x_k)` from the prox step that produced `x_k` (none at `k = 0`).
    pub fn subgradient(&self) -> Option<&[f64]> {
        self.subgradient.as_deref()
    }

    /// `∇f(x_k) + ξ_k`; at `k = 0` the minimum-norm element of `∇f(x_0) + ∂r(x_0)`.
    pub fn stationarity_vector(&self) -> Result<Vec<f64>> {
        let grad = self.problem.gradient(&self.x)?;
        Ok(match &self.subgradient {
            Some(xi) => grad.iter().zip(xi).map(|(g, s)| g + s).collect(),
            None => self.problem.regularizer().min_norm_residual(&grad, &self.x),
        })
    }

    /// One master iteration: refresh the slots of `arrivals` (pairs of
    /// component and delay), average, and take the prox step with `gamma`.
    pub fn step(&mut self, gamma: f64, arrivals: &[(usize, usize)]) -> Result<()> {
        let n = self.table.len();
        for &(i, delay) in arrivals {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "component",
                    index: i,
                    count: n,
                });
            }
            if delay > self.k {
                return Err(Error::DelayBoundViolated { k: self.k, tau: delay });
            }
            let source = self.k - delay;
            let xs = self.history.get(source)?;
            self.problem.smooth().component_gradient_into(i, xs, &mut self.table[i]);
            self.sources[i] = source;
        }
        self.recompute_aggregate();
        let pre: Vec<f64> = self.x.iter().zip(&self.aggregate).map(|(x, g)| x - gamma * g).collect();
        let post = self.problem.regularizer().prox(gamma, &pre)?;
        self.subgradient = Some(self.problem.regularizer().recover_subgradient(gamma, &pre, &post)?);
        self.history.push(&post);
        self.x = post;
        self.k += 1;
        Ok(())
    }
}

/// Pairs `(i, τ_k⁽ⁱ⁾)` for components whose referenced iterate differs from the
/// one their slot was computed at.
fn arrivals_at(state: &PiagState<'_>, delays: &DelaySequence, n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..n)
        .filter_map(|i| {
            let tau = delays.component_delay(i, k);
            (k.checked_sub(tau) != Some(state.sources[i])).then_some((i, tau))
        })
        .collect()
}

pub(crate) fn check_delays(delays: &DelaySequence, horizon: usize) -> Result<()> {
    if delays.horizon() < horizon {
        return Err(Error::DelaysTooShort {
            len: delays.values().len(),
            needed: horizon + 1,
        });
    }
    if let Conformance::Fail { k } = validate_assumption1(delays, delays.params()) {
        return Err(Error::DelayBoundViolated {
            k,
            tau: delays.values()[k],
        });
    }
    Ok(())
}

pub(crate) fn check_policy(
    policy: &StepSizePolicy,
    delays: &DelaySequence,
    horizon: usize,
    options: &RunOptions,
) -> Result<()> {
    let verdict = check_admissibility(policy, delays.values(), horizon)?;
    if !options.override_admissibility {
        verdict.into_result()?;
    }
    Ok(())
}

/// Runs `horizon` PIAG iterations and records metrics at `x_0..=x_horizon`.
pub fn piag_run(
    problem: &CompositeProblem,
    policy: &StepSizePolicy,
    delays: &DelaySequence,
    x0: &[f64],
    horizon: usize,
    options: &RunOptions,
) -> Result<RunTrace> {
    piag_run_observed(problem, policy, delays, x0, horizon, options, |_, _| {})
}

/// [`piag_run`] with a callback receiving `(k, x_k)` for every iterate.
pub fn piag_run_observed(
    problem: &CompositeProblem,
    policy: &StepSizePolicy,
    delays: &DelaySequence,
    x0: &[f64],
    horizon: usize,
    options: &RunOptions,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<RunTrace> {
    let n = problem.n_components();
    if let Some(m) = delays.n_components() {
        if m != n {
            return Err(Error::DimensionMismatch { expected: n, got: m });
        }
    }
    check_delays(delays, horizon)?;
    check_policy(policy, delays, horizon, options)?;

    let max_delay = delays.values()[..=horizon].iter().copied().max().unwrap_or(0);
    let mut state = PiagState::new(problem, x0, max_delay + 1)?;
    let mut trace = RunTrace::new(EngineKind::Piag);
    for k in 0..=horizon {
        observer(k, state.x());
        let gamma = policy.step_size(k);
        let stationarity = linalg::norm_sq(&state.stationarity_vector()?);
        trace.push(
            k,
            problem.objective_error(state.x())?,
            stationarity,
            gamma,
            delays.values()[k],
        );
        if k < horizon {
            let arrivals = arrivals_at(&state, delays, n, k);
            state.step(gamma, &arrivals)?;
        }
    }
    Ok(trace)
}
