//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! engine = piag
//! b = 0.6
//! ```
//!
//! Files and command-line overrides go through the same [`ExperimentConfig::set`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use asyncopt::bounds::StepsumSource;
use asyncopt::delay::DelayParams;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Piag,
    Bcd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemFamily {
    /// `ℓ1`/`ℓ2`-regularized logistic regression.
    Logistic,
    /// Least squares with an `ℓ1` penalty.
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Libsvm(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelaySource {
    Stochastic,
    Adversarial,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    /// Delay-matched schedule built from `(a, b, c)`.
    Adaptive,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub problem: ProblemFamily,
    pub data: DataSource,
    pub samples: usize,
    pub features: usize,
    pub sparsity: f64,
    pub data_seed: u64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub batches: usize,
    pub blocks: usize,
    pub delay: DelaySource,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delay_seed: u64,
    pub schedule: ScheduleSpec,
    pub h: f64,
    pub horizon: usize,
    pub trials: usize,
    pub bcd_seed: u64,
    pub stepsum: StepsumSource,
    pub override_admissibility: bool,
    pub reference_tolerance: f64,
    pub processors: Option<usize>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Piag,
            problem: ProblemFamily::Logistic,
            data: DataSource::Synthetic,
            samples: 500,
            features: 100,
            sparsity: 0.1,
            data_seed: 1,
            lambda1: 1e-5,
            lambda2: 1e-4,
            batches: 10,
            blocks: 1,
            delay: DelaySource::Stochastic,
            a: 0.1,
            b: 0.2,
            c: 0.0,
            delay_seed: 1,
            schedule: ScheduleSpec::Adaptive,
            h: 0.99,
            horizon: 10_000,
            trials: 32,
            bcd_seed: 1,
            stepsum: StepsumSource::Exact,
            override_admissibility: false,
            reference_tolerance: 1e-10,
            processors: None,
            output: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "engine",
    "problem",
    "data",
    "samples",
    "features",
    "sparsity",
    "data_seed",
    "lambda1",
    "lambda2",
    "batches",
    "blocks",
    "delay",
    "a",
    "b",
    "c",
    "delay_seed",
    "schedule",
    "h",
    "horizon",
    "trials",
    "bcd_seed",
    "stepsum",
    "override_admissibility",
    "reference_tolerance",
    "processors",
    "output",
];

fn num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::config("config", format!("invalid value for `{key}`: {value:?}")))
}

fn flag(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(
            "config",
            format!("invalid boolean for `{key}`: {value:?}"),
        )),
    }
}

impl ExperimentConfig {
    /// Parses a config file's text over the defaults and validates it.
    pub fn parse_str(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(
                    "config",
                    format!("line {}: expected `key = value`, got {raw:?}", idx + 1),
                )
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::config("config", format!("line {}: {}", idx + 1, e.message)))?;
        }
        Ok(())
    }

    /// Sets one key; does not validate cross-field constraints.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "engine" => {
                self.engine = match value {
                    "piag" => Engine::Piag,
                    "bcd" => Engine::Bcd,
                    _ => {
                        return Err(CliError::config(
                            "config",
                            format!("unknown engine {value:?} (piag | bcd)"),
                        ))
                    }
                }
            }
            "problem" => {
                self.problem = match value {
                    "logistic" => ProblemFamily::Logistic,
                    "lasso" => ProblemFamily::Lasso,
                    _ => {
                        return Err(CliError::config(
                            "config",
                            format!("unknown problem {value:?} (logistic | lasso)"),
                        ))
                    }
                }
            }
            "data" => {
                self.data = match value {
                    "synthetic" => DataSource::Synthetic,
                    path => DataSource::Libsvm(PathBuf::from(path)),
                }
            }
            "samples" => self.samples = num(key, value)?,
            "features" => self.features = num(key, value)?,
            "sparsity" => self.sparsity = num(key, value)?,
            "data_seed" => self.data_seed = num(key, value)?,
            "lambda1" => self.lambda1 = num(key, value)?,
            "lambda2" => self.lambda2 = num(key, value)?,
            "batches" => self.batches = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "delay" => {
                self.delay = match value {
                    "stochastic" => DelaySource::Stochastic,
                    "adversarial" => DelaySource::Adversarial,
                    path => DelaySource::File(PathBuf::from(path)),
                }
            }
            "a" => self.a = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "c" => self.c = num(key, value)?,
            "delay_seed" => self.delay_seed = num(key, value)?,
            "schedule" => {
                self.schedule = match value {
                    "adaptive" => ScheduleSpec::Adaptive,
                    v => match v.strip_prefix("constant:") {
                        Some(step) => ScheduleSpec::Constant(num(key, step)?),
                        None => {
                            return Err(CliError::config(
                                "config",
                                format!("unknown schedule {value:?} (adaptive | constant:<step>)"),
                            ))
                        }
                    },
                }
            }
            "h" => self.h = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "bcd_seed" => self.bcd_seed = num(key, value)?,
            "stepsum" => {
                self.stepsum = match value {
                    "exact" => StepsumSource::Exact,
                    "closed_form" => StepsumSource::ClosedForm,
                    _ => {
                        return Err(CliError::config(
                            "config",
                            format!("unknown stepsum {value:?} (exact | closed_form)"),
                        ))
                    }
                }
            }
            "override_admissibility" => self.override_admissibility = flag(key, value)?,
            "reference_tolerance" => self.reference_tolerance = num(key, value)?,
            "processors" => self.processors = Some(num(key, value)?),
            "output" => self.output = PathBuf::from(value),
            _ => return Err(CliError::config("config", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn delay_params(&self) -> CliResult<DelayParams> {
        DelayParams::new(self.a, self.b, self.c).map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config("config", m));
        self.delay_params()?;
        if !(self.h > 0.0 && self.h < 1.0) {
            return bad(format!("h must lie in (0, 1), got {}", self.h));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.batches == 0 || self.blocks == 0 {
            return bad("batches and blocks must be at least 1".into());
        }
        if self.data == DataSource::Synthetic {
            if self.samples == 0 || self.features == 0 {
                return bad("samples and features must be at least 1".into());
            }
            if self.batches > self.samples {
                return bad(format!(
                    "cannot split {} samples into {} batches",
                    self.samples, self.batches
                ));
            }
            if self.blocks > self.features {
                return bad(format!(
                    "cannot split {} features into {} blocks",
                    self.features, self.blocks
                ));
            }
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad(format!("sparsity must lie in (0, 1], got {}", self.sparsity));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("regularization weights must be nonnegative".into());
        }
        if let ScheduleSpec::Constant(step) = self.schedule {
            if !(step > 0.0 && step.is_finite()) {
                return bad(format!("constant step must be positive, got {step}"));
            }
        }
        if self.stepsum == StepsumSource::ClosedForm && self.schedule != ScheduleSpec::Adaptive {
            return bad("closed-form step sums need the adaptive schedule".into());
        }
        if !(self.reference_tolerance > 0.0) {
            return bad("reference_tolerance must be positive".into());
        }
        if self.processors == Some(0) {
            return bad("processors must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put(
            "engine",
            match self.engine {
                Engine::Piag => "piag".into(),
                Engine::Bcd => "bcd".into(),
            },
        );
        put(
            "problem",
            match self.problem {
                ProblemFamily::Logistic => "logistic".into(),
                ProblemFamily::Lasso => "lasso".into(),
            },
        );
        put(
            "data",
            match &self.data {
                DataSource::Synthetic => "synthetic".into(),
                DataSource::Libsvm(p) => p.display().to_string(),
            },
        );
        put("samples", self.samples.to_string());
        put("features", self.features.to_string());
        put("sparsity", self.sparsity.to_string());
        put("data_seed", self.data_seed.to_string());
        put("lambda1", self.lambda1.to_string());
        put("lambda2", self.lambda2.to_string());
        put("batches", self.batches.to_string());
        put("blocks", self.blocks.to_string());
        put(
            "delay",
            match &self.delay {
                DelaySource::Stochastic => "stochastic".into(),
                DelaySource::Adversarial => "adversarial".into(),
                DelaySource::File(p) => p.display().to_string(),
            },
        );
        put("a", self.a.to_string());
        put("b", self.b.to_string());
        put("c", self.c.to_string());
        put("delay_seed", self.delay_seed.to_string());
        put(
            "schedule",
            match self.schedule {
                ScheduleSpec::Adaptive => "adaptive".into(),
                ScheduleSpec::Constant(step) => format!("constant:{step}"),
            },
        );
        put("h", self.h.to_string());
        put("horizon", self.horizon.to_string());
        put("trials", self.trials.to_string());
        put("bcd_seed", self.bcd_seed.to_string());
        put(
            "stepsum",
            match self.stepsum {
                StepsumSource::Exact => "exact".into(),
                StepsumSource::ClosedForm => "closed_form".into(),
            },
        );
        put("override_admissibility", self.override_admissibility.to_string());
        put("reference_tolerance", self.reference_tolerance.to_string());
        if let Some(p) = self.processors {
            put("processors", p.to_string());
        }
        put("output", self.output.display().to_string());
        s
    }
}
