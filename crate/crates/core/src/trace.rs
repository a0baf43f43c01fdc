//! Per-iteration run records and their CSV form.

use std::io::Write;

use crate::error::Result;
use crate::linalg::CompensatedPrefix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    /// `stationarity_sq` holds `‖∇f(x_k) + ξ_k‖²`.
    Piag,
    /// `stationarity_sq` holds `‖∇̃P(x_k)‖²`.
    Bcd,
}

impl EngineKind {
    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Piag => "piag",
            EngineKind::Bcd => "bcd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `P(x_k) − P*`, when `P*` is known.
    pub objective_error: Option<f64>,
    pub stationarity_sq: f64,
    /// `min_{t ≤ k}` of `stationarity_sq`.
    pub running_best: f64,
    pub gamma: f64,
    pub tau: usize,
}

pub const CSV_HEADER: [&str; 6] = [
    "k",
    "objective_error",
    "stationarity_sq",
    "running_best",
    "gamma",
    "tau",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub engine: EngineKind,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(engine: EngineKind) -> Self {
        Self {
            engine,
            records: Vec::new(),
        }
    }

    /// Appends a record, maintaining the running minimum.
    pub fn push(&mut self, k: usize, objective_error: Option<f64>, stationarity_sq: f64, gamma: f64, tau: usize) {
        let running_best = match self.records.last() {
            Some(r) => r.running_best.min(stationarity_sq),
            None => stationarity_sq,
        };
        self.records.push(TraceRecord {
            k,
            objective_error,
            stationarity_sq,
            running_best,
            gamma,
            tau,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// `S_k = Σ_{t<k} γ_t` aligned with the records (`S_0 = 0`).
    pub fn stepsums(&self) -> Vec<f64> {
        let prefix = CompensatedPrefix::new(self.records.iter().map(|r| r.gamma));
        (0..self.records.len()).map(|k| prefix.range_sum(0, k)).collect()
    }

    pub fn objective_errors(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.objective_error).collect()
    }

    /// Columns `k, objective_error, stationarity_sq, running_best, gamma, tau`.
    /// Floats use the shortest representation that round-trips; an unknown
    /// objective error is an empty cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.objective_error.map(|v| v.to_string()).unwrap_or_default(),
                r.stationarity_sq.to_string(),
                r.running_best.to_string(),
                r.gamma.to_string(),
                r.tau.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-record mean over traces of identical length; `k`, `gamma` and `tau`
    /// are taken from the first trace.
    pub fn average(traces: &[RunTrace]) -> Option<RunTrace> {
        let first = traces.first()?;
        let n = traces.len() as f64;
        let mut records = Vec::with_capacity(first.len());
        for (idx, r0) in first.records.iter().enumerate() {
            let mean = |f: &dyn Fn(&TraceRecord) -> f64| traces.iter().map(|t| f(&t.records[idx])).sum::<f64>() / n;
            let objective_error = if traces.iter().all(|t| t.records[idx].objective_error.is_some()) {
                Some(mean(&|r| r.objective_error.unwrap()))
            } else {
                None
            };
            records.push(TraceRecord {
                k: r0.k,
                objective_error,
                stationarity_sq: mean(&|r| r.stationarity_sq),
                running_best: mean(&|r| r.running_best),
                gamma: r0.gamma,
                tau: r0.tau,
            });
        }
        Some(RunTrace {
            engine: first.engine,
            records,
        })
    }
}
