//! Delay sequences under the polynomial growth model
//! `τ_k ≤ min(k, a·k^b + c)`: a seeded stochastic generator, the adversarial
//! epoch construction, and conformance checks.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    a: f64,
    b: f64,
    c: f64,
}

impl DelayParams {
    /// Requires `a ∈ (0,1)`, `b ∈ [0,1]`, `c ≥ 0`.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delay parameter a must lie in (0,1), got {a}"
            )));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!(
                "delay parameter b must lie in [0,1], got {b}"
            )));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delay parameter c must be >= 0, got {c}"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `a·k^b + c`.
    pub fn growth(&self, k: f64) -> f64 {
        self.a * k.powf(self.b) + self.c
    }

    /// `min(k, a·k^b + c)`.
    pub fn bound(&self, k: usize) -> f64 {
        (k as f64).min(self.growth(k as f64))
    }

    pub fn admits(&self, k: usize, tau: usize) -> bool {
        tau <= k && (tau as f64) <= self.growth(k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayKind {
    Stochastic {
        seed: u64,
    },
    /// Epoch starts `T_0 = 0 < T_1 < …`, all within the horizon.
    Adversarial {
        epoch_starts: Vec<usize>,
    },
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySequence {
    values: Vec<usize>,
    per_component: Option<Vec<Vec<usize>>>,
    params: DelayParams,
    kind: DelayKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conformance {
    Pass,
    Fail { k: usize },
}

impl Conformance {
    pub fn passed(&self) -> bool {
        matches!(self, Conformance::Pass)
    }
}

impl DelaySequence {
    /// A user-supplied global sequence.
    pub fn from_values(values: Vec<usize>, params: DelayParams) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty delay sequence".into()));
        }
        Ok(Self {
            values,
            per_component: None,
            params,
            kind: DelayKind::UserSupplied,
        })
    }

    /// A user-supplied per-component table (`table[i][k]`); the global
    /// sequence is the max over components.
    pub fn from_components(table: Vec<Vec<usize>>, params: DelayParams) -> Result<Self> {
        let len = table.first().map(Vec::len).unwrap_or(0);
        if len == 0 || table.iter().any(|row| row.len() != len) {
            return Err(Error::InvalidParameter(
                "per-component delay table must be nonempty and rectangular".into(),
            ));
        }
        let values = (0..len)
            .map(|k| table.iter().map(|row| row[k]).max().unwrap())
            .collect();
        Ok(Self {
            values,
            per_component: Some(table),
            params,
            kind: DelayKind::UserSupplied,
        })
    }

    /// `τ_0..τ_K`.
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn per_component(&self) -> Option<&[Vec<usize>]> {
        self.per_component.as_deref()
    }

    pub fn params(&self) -> &DelayParams {
        &self.params
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    /// Largest `K` with `τ_K` available.
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn max_delay(&self) -> usize {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// `τ_k⁽ⁱ⁾`, falling back to the global `τ_k` when no per-component table
    /// exists.
    pub fn component_delay(&self, i: usize, k: usize) -> usize {
        match &self.per_component {
            Some(t) => t[i][k],
            None => self.values[k],
        }
    }

    pub fn n_components(&self) -> Option<usize> {
        self.per_component.as_ref().map(Vec::len)
    }

    pub fn epoch_starts(&self) -> Option<&[usize]> {
        match &self.kind {
            DelayKind::Adversarial { epoch_starts } => Some(epoch_starts),
            _ => None,
        }
    }

    /// Writes `k,tau` or, with a per-component table, `k,tau_1,…,tau_n`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.per_component {
            None => {
                w.write_record(["k", "tau"])?;
                for (k, t) in self.values.iter().enumerate() {
                    w.write_record([k.to_string(), t.to_string()])?;
                }
            }
            Some(table) => {
                let mut header = vec!["k".to_string()];
                header.extend((1..=table.len()).map(|i| format!("tau_{i}")));
                w.write_record(&header)?;
                for k in 0..self.values.len() {
                    let mut row = vec![k.to_string()];
                    row.extend(table.iter().map(|r| r[k].to_string()));
                    w.write_record(&row)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`DelaySequence::write_csv`]. Rows must be
    /// `k = 0, 1, 2, …` in order.
    pub fn read_csv<R: Read>(reader: R, params: DelayParams) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let columns = r.headers()?.len();
        if columns < 2 {
            return Err(Error::InvalidParameter(
                "delay CSV needs a k column and at least one tau column".into(),
            ));
        }
        let mut table: Vec<Vec<usize>> = vec![Vec::new(); columns - 1];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("row {}: {s:?} is not a nonnegative integer", row + 1))
                })
            };
            if parse(&rec[0])? != row {
                return Err(Error::InvalidParameter(format!("row {}: expected k = {row}", row + 1)));
            }
            for (col, cell) in rec.iter().skip(1).enumerate() {
                table[col].push(parse(cell)?);
            }
        }
        if columns == 2 {
            Self::from_values(table.pop().unwrap(), params)
        } else {
            Self::from_components(table, params)
        }
    }
}

/// The increment-or-resample model run independently per component: the delay
/// grows by one while that stays within the bound, otherwise it is redrawn
/// uniformly from `{1, …, min(k, ⌊a·k^b + c⌋)}` (or set to 0 if that set is
/// empty). The global delay is the max over components.
pub fn sample_stochastic_delays(
    params: DelayParams,
    horizon: usize,
    n_components: usize,
    seed: u64,
) -> Result<DelaySequence> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("delay horizon must be at least 1".into()));
    }
    if n_components == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = vec![vec![0usize; horizon + 1]; n_components];
    let mut values = vec![0usize; horizon + 1];
    for k in 1..=horizon {
        let growth = params.growth(k as f64);
        let cap = (k as f64).min(growth);
        let range = k.min(growth.floor() as usize);
        let mut max = 0;
        for row in table.iter_mut() {
            let prev = row[k - 1];
            let tau = if (prev as f64) <= cap - 1.0 {
                prev + 1
            } else if range == 0 {
                0
            } else {
                rng.random_range(1..=range)
            };
            row[k] = tau;
            max = max.max(tau);
        }
        values[k] = max;
    }
    Ok(DelaySequence {
        values,
        per_component: Some(table),
        params,
        kind: DelayKind::Stochastic { seed },
    })
}

/// Epoch boundaries `T_0 = 0`, `T_{t+1} = max{κ : κ − (aκ^b + c) ≤ T_t} + 1`,
/// up to and including the last one not exceeding `horizon`.
pub fn adversarial_epoch_starts(params: &DelayParams, horizon: usize) -> Vec<usize> {
    let mut starts = vec![0usize];
    let mut current = 0usize;
    loop {
        let threshold = current as f64;
        // κ − (aκ^b + c) is nondecreasing on ℕ₀, so scan up to the first failure.
        let mut kappa = current;
        while kappa <= horizon && (kappa + 1) as f64 - params.growth((kappa + 1) as f64) <= threshold {
            kappa += 1;
        }
        let next = kappa + 1;
        if next > horizon {
            break;
        }
        starts.push(next);
        current = next;
    }
    starts
}

/// `τ_k = k − T_t` for `k ∈ [T_t, T_{t+1})`.
pub fn build_adversarial_delays(params: DelayParams, horizon: usize) -> Result<DelaySequence> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("delay horizon must be at least 1".into()));
    }
    let starts = adversarial_epoch_starts(&params, horizon);
    let mut values = Vec::with_capacity(horizon + 1);
    let mut epoch = 0;
    for k in 0..=horizon {
        while epoch + 1 < starts.len() && starts[epoch + 1] <= k {
            epoch += 1;
        }
        values.push(k - starts[epoch]);
    }
    Ok(DelaySequence {
        values,
        per_component: None,
        params,
        kind: DelayKind::Adversarial { epoch_starts: starts },
    })
}

/// First `k` where `τ_k > k` or `τ_k > a·k^b + c`.
pub fn validate_values(values: &[usize], params: &DelayParams) -> Conformance {
    match values.iter().enumerate().find(|&(k, &tau)| !params.admits(k, tau)) {
        Some((k, _)) => Conformance::Fail { k },
        None => Conformance::Pass,
    }
}

/// Checks the growth bound at every `k` for the global sequence and for each
/// component row, and that the global delay is the max over components.
pub fn validate_assumption1(seq: &DelaySequence, params: &DelayParams) -> Conformance {
    let mut first = match validate_values(&seq.values, params) {
        Conformance::Fail { k } => Some(k),
        Conformance::Pass => None,
    };
    if let Some(table) = &seq.per_component {
        for row in table {
            if let Conformance::Fail { k } = validate_values(row, params) {
                first = Some(first.map_or(k, |f| f.min(k)));
            }
        }
        for k in 0..seq.values.len() {
            if first.is_some_and(|f| f <= k) {
                break;
            }
            let max = table
                .iter()
                .map(|r| r.get(k).copied().unwrap_or(usize::MAX))
                .max()
                .unwrap();
            if max != seq.values[k] {
                first = Some(k);
                break;
            }
        }
    }
    match first {
        Some(k) => Conformance::Fail { k },
        None => Conformance::Pass,
    }
}

/// `max{t : T_t ≤ k − 1} + 1`: the number of plain gradient steps that produce
/// `x_k` under the adversarial delays.
pub fn count_effective_gd_steps(seq: &DelaySequence, k: usize) -> Result<usize> {
    let starts = seq.epoch_starts().ok_or(Error::NotAdversarial)?;
    if k == 0 || k - 1 > seq.horizon() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {}], got {k}",
            seq.horizon() + 1
        )));
    }
    Ok(starts.partition_point(|&t| t < k))
}
