//! Asynchronous block coordinate descent replayed from a delay table: at step
//! `k` a block `j_k` is drawn uniformly and only that block moves,
//! `x_{k+1}^{(j)} = prox_{γ_k r_j}(x_k^{(j)} − γ_k ∇_j f(x_{k−τ_k}))`.
//!
//! Block draws come from a ChaCha8 stream keyed by `(seed, trial)` and are
//! consumed in step order, so they never depend on the iterates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::delay::DelaySequence;
use crate::error::{Error, Result};
use crate::history::IterateHistory;
use crate::linalg;
use crate::piag::{check_delays, check_policy, RunOptions};
use crate::problem::CompositeProblem;
use crate::schedule::StepSizePolicy;
use crate::trace::{EngineKind, RunTrace};

/// Block indices `j_0..j_{count−1}` for one trial.
pub fn block_sequence(seed: u64, trial: u64, count: usize, blocks: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..count).map(|_| rng.random_range(0..blocks)).collect()
}

#[derive(Debug, Clone)]
pub struct BcdState<'p> {
    problem: &'p CompositeProblem,
    k: usize,
    x: Vec<f64>,
    history: IterateHistory,
}

impl<'p> BcdState<'p> {
    pub fn new(problem: &'p CompositeProblem, x0: &[f64], history: usize) -> Result<Self> {
        if x0.len() != problem.dimension() {
            return Err(Error::DimensionMismatch {
                expected: problem.dimension(),
                got: x0.len(),
            });
        }
        if !problem.regularizer().is_separable_under(problem.partition()) {
            return Err(Error::NonSeparable);
        }
        Ok(Self {
            problem,
            k: 0,
            x: x0.to_vec(),
            history: IterateHistory::new(x0, history),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Updates block `block` with the partial gradient read at `x_{k−delay}`.
    pub fn step(&mut self, gamma: f64, block: usize, delay: usize) -> Result<()> {
        let partition = self.problem.partition();
        let range = partition.range(block)?;
        if delay > self.k {
            return Err(Error::DelayBoundViolated { k: self.k, tau: delay });
        }
        let stale = self.history.get(self.k - delay)?;
        let mut g = vec![0.0; range.len()];
        self.problem
            .smooth()
            .partial_gradient_into(stale, range.clone(), &mut g);
        let pre: Vec<f64> = self.x[range.clone()]
            .iter()
            .zip(&g)
            .map(|(x, gi)| x - gamma * gi)
            .collect();
        self.problem
            .regularizer()
            .prox_block_into(gamma, partition, block, &pre, &mut self.x[range]);
        self.history.push(&self.x);
        self.k += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdRun {
    pub trials: Vec<RunTrace>,
    /// Record-wise mean of the trials.
    pub averaged: RunTrace,
    /// Standard error over trials of `running_best_k · Σ_{t<k} γ_t`, per record.
    pub scaled_best_stderr: Vec<f64>,
}

/// A single trial with a callback receiving `(k, x_k)`.
#[allow(clippy::too_many_arguments)]
pub fn bcd_trial_observed(
    problem: &CompositeProblem,
    policy: &StepSizePolicy,
    delays: &DelaySequence,
    x0: &[f64],
    horizon: usize,
    seed: u64,
    trial: u64,
    options: &RunOptions,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<RunTrace> {
    check_delays(delays, horizon)?;
    check_policy(policy, delays, horizon, options)?;
    let tau = &delays.values()[..=horizon];
    let mut state = BcdState::new(problem, x0, tau.iter().copied().max().unwrap_or(0) + 1)?;
    let draws = block_sequence(seed, trial, horizon, problem.partition().len());
    let mut trace = RunTrace::new(EngineKind::Bcd);
    for k in 0..=horizon {
        observer(k, state.x());
        let gamma = policy.step_size(k);
        let stationarity = linalg::norm_sq(&problem.prox_gradient_mapping(state.x())?);
        trace.push(k, problem.objective_error(state.x())?, stationarity, gamma, tau[k]);
        if k < horizon {
            state.step(gamma, draws[k], tau[k])?;
        }
    }
    Ok(trace)
}

/// Runs `n_trials` independent trials (in parallel) and averages them.
#[allow(clippy::too_many_arguments)]
pub fn bcd_run(
    problem: &CompositeProblem,
    policy: &StepSizePolicy,
    delays: &DelaySequence,
    x0: &[f64],
    horizon: usize,
    seed: u64,
    n_trials: usize,
    options: &RunOptions,
) -> Result<BcdRun> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if !problem.regularizer().is_separable_under(problem.partition()) {
        return Err(Error::NonSeparable);
    }
    let trials: Vec<RunTrace> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| bcd_trial_observed(problem, policy, delays, x0, horizon, seed, t, options, |_, _| {}))
        .collect::<Result<_>>()?;
    let averaged = RunTrace::average(&trials).expect("non-empty");
    let sums = averaged.stepsums();
    let n = trials.len() as f64;
    let scaled_best_stderr = (0..averaged.len())
        .map(|idx| {
            if trials.len() < 2 {
                return 0.0;
            }
            let vals: Vec<f64> = trials.iter().map(|t| t.records[idx].running_best * sums[idx]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(BcdRun {
        trials,
        averaged,
        scaled_best_stderr,
    })
}
