//! The experiment pipeline: problem → reference optimum → delays → schedule →
//! admissibility → engine → bound curves → dominance → artifacts.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use asyncopt::bcd::bcd_run;
use asyncopt::bounds::{dominance_report, BoundConstants, BoundCurve, BoundKind, DominanceReport, StepsumSource};
use asyncopt::delay::{
    build_adversarial_delays, sample_stochastic_delays, validate_assumption1, Conformance, DelaySequence,
};
use asyncopt::linalg;
use asyncopt::objectives::data::{load_libsvm, synthesize_classification};
use asyncopt::objectives::logistic::{build_logistic_problem, LogisticSpec};
use asyncopt::objectives::quadratic::{build_quadratic_components, least_squares_components, synthesize_regression};
use asyncopt::piag::{piag_run, RunOptions};
use asyncopt::problem::{BlockPartition, CompositeProblem};
use asyncopt::prox::Regularizer;
use asyncopt::reference::{with_reference_optimum, ReferenceOptions};
use asyncopt::schedule::{check_admissibility, Admissibility, PolicyKind, StepSizePolicy};
use asyncopt::trace::RunTrace;

use crate::config::{DataSource, DelaySource, Engine, ExperimentConfig, ProblemFamily, ScheduleSpec};
use crate::error::{CliError, CliResult, FailureKind, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Matches the reference experimental setup.
    Paper,
    Config,
    Derived,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Paper => "paper",
            Provenance::Config => "config",
            Provenance::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryEntry {
    pub key: String,
    pub value: String,
    pub provenance: Provenance,
}

impl fmt::Display for SummaryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} [{}]", self.key, self.value, self.provenance)
    }
}

#[derive(Debug, Default)]
struct Summary(Vec<SummaryEntry>);

impl Summary {
    fn put(&mut self, key: impl Into<String>, value: impl ToString, provenance: Provenance) {
        self.0.push(SummaryEntry {
            key: key.into(),
            value: value.to_string(),
            provenance,
        });
    }

    /// Tags a configured value `paper` when it equals the reference setup.
    fn put_config(&mut self, key: &str, value: f64, paper_value: Option<f64>) {
        let tag = if paper_value == Some(value) {
            Provenance::Paper
        } else {
            Provenance::Config
        };
        self.put(key, value, tag);
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    /// Engine trace; for BCD the trial average.
    pub trace: RunTrace,
    /// Per-trial BCD traces (empty for PIAG).
    pub trials: Vec<RunTrace>,
    pub curves: Vec<(BoundKind, Vec<f64>)>,
    pub reports: Vec<DominanceReport>,
    pub admissibility: Admissibility,
    pub summary: Vec<SummaryEntry>,
}

impl RunOutcome {
    pub fn final_error(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.objective_error)
    }

    pub fn report(&self, kind: BoundKind) -> Option<&DominanceReport> {
        self.reports.iter().find(|r| r.kind == kind)
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> CliResult<CompositeProblem> {
    let stage = "problem";
    match cfg.problem {
        ProblemFamily::Logistic => {
            let dataset = match &cfg.data {
                DataSource::Synthetic => {
                    synthesize_classification(cfg.samples, cfg.features, cfg.sparsity, cfg.data_seed)
                }
                DataSource::Libsvm(path) => load_libsvm(path, None),
            }
            .stage(stage)?;
            let spec = LogisticSpec {
                lambda1: cfg.lambda1,
                lambda2: cfg.lambda2,
                n_batches: cfg.batches,
                shuffle_seed: cfg.data_seed,
                n_blocks: cfg.blocks,
            };
            build_logistic_problem(&dataset, &spec).stage(stage)
        }
        ProblemFamily::Lasso => {
            if cfg.data != DataSource::Synthetic {
                return Err(CliError::config(stage, "the lasso family only supports synthetic data"));
            }
            let (design, targets) = synthesize_regression(cfg.samples, cfg.features, cfg.data_seed);
            let components = least_squares_components(&design, &targets, cfg.batches).stage(stage)?;
            let partition = BlockPartition::even(cfg.features, cfg.blocks).stage(stage)?;
            build_quadratic_components(components, Regularizer::l1(cfg.lambda1).stage(stage)?, partition).stage(stage)
        }
    }
}

/// Attaches `P*` (and `x*`) from a reference solve unless the problem already
/// carries an analytic optimum.
pub fn attach_optimum(problem: CompositeProblem, tolerance: f64) -> CliResult<(CompositeProblem, Option<f64>)> {
    if problem.optimum().is_some_and(|o| o.point.is_some()) {
        return Ok((problem, None));
    }
    let opts = ReferenceOptions {
        tolerance,
        ..ReferenceOptions::default()
    };
    let (p, sol) = with_reference_optimum(problem, &opts).stage("reference")?;
    Ok((p, Some(sol.residual)))
}

pub fn build_delays(cfg: &ExperimentConfig, n_components: usize) -> CliResult<DelaySequence> {
    let stage = "delays";
    let params = cfg.delay_params()?;
    let seq = match &cfg.delay {
        DelaySource::Stochastic => {
            sample_stochastic_delays(params, cfg.horizon, n_components, cfg.delay_seed).stage(stage)?
        }
        DelaySource::Adversarial => build_adversarial_delays(params, cfg.horizon).stage(stage)?,
        DelaySource::File(path) => {
            let file = File::open(path).stage(stage)?;
            DelaySequence::read_csv(file, params).stage(stage)?
        }
    };
    if let Conformance::Fail { k } = validate_assumption1(&seq, &params) {
        return Err(CliError {
            stage: "validate",
            kind: FailureKind::Runtime,
            message: format!("delay sequence violates the delay bound at k = {k}"),
        });
    }
    Ok(seq)
}

pub fn build_policy(cfg: &ExperimentConfig, problem: &CompositeProblem) -> CliResult<StepSizePolicy> {
    let smoothness = match cfg.engine {
        Engine::Piag => problem.smoothness().aggregate,
        Engine::Bcd => problem.smoothness().blockwise,
    };
    let kind = match cfg.schedule {
        ScheduleSpec::Adaptive => match cfg.engine {
            Engine::Piag => PolicyKind::Piag(cfg.delay_params()?),
            Engine::Bcd => PolicyKind::Bcd(cfg.delay_params()?),
        },
        ScheduleSpec::Constant(step) => PolicyKind::Constant(step),
    };
    StepSizePolicy::new(kind, cfg.h, smoothness).stage("schedule")
}

fn write_file(
    path: &Path,
    stage: &'static str,
    body: impl FnOnce(&mut BufWriter<File>) -> asyncopt::Result<()>,
) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).stage(stage)?);
    body(&mut w).stage(stage)?;
    w.flush().stage(stage)
}

fn write_trace(path: &Path, trace: &RunTrace) -> CliResult<()> {
    write_file(path, "output", |w| trace.write_csv(w))
}

fn write_bounds(path: &Path, curves: &[(BoundKind, Vec<f64>)], horizon: usize) -> CliResult<()> {
    write_file(path, "output", |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        header.extend(curves.iter().map(|(k, _)| k.name().to_string()));
        csv.write_record(&header)?;
        for k in 0..=horizon {
            let mut row = vec![k.to_string()];
            row.extend(curves.iter().map(|(_, v)| v[k].to_string()));
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// Runs one experiment and writes `config.txt`, `delays.csv`, `trace.csv`,
/// `bound.csv`, `summary.txt` (and `trials/` for BCD) into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let (problem, reference_residual) = attach_optimum(problem, cfg.reference_tolerance)?;
    let n_sequences = match cfg.engine {
        Engine::Piag => problem.n_components(),
        Engine::Bcd => 1,
    };
    let delays = build_delays(cfg, n_sequences)?;
    let policy = build_policy(cfg, &problem)?;
    let admissibility = check_admissibility(&policy, delays.values(), cfg.horizon).stage("admissibility")?;
    if !cfg.override_admissibility {
        admissibility.into_result().stage("admissibility")?;
    }
    let options = RunOptions {
        override_admissibility: cfg.override_admissibility,
    };
    let x0 = vec![0.0; problem.dimension()];
    let (trace, trials, stderr) = match cfg.engine {
        Engine::Piag => (
            piag_run(&problem, &policy, &delays, &x0, cfg.horizon, &options).stage("engine")?,
            Vec::new(),
            None,
        ),
        Engine::Bcd => {
            let run = bcd_run(
                &problem,
                &policy,
                &delays,
                &x0,
                cfg.horizon,
                cfg.bcd_seed,
                cfg.trials,
                &options,
            )
            .stage("engine")?;
            (run.averaged, run.trials, Some(run.scaled_best_stderr))
        }
    };

    let optimum = problem.optimum().expect("attached above");
    let initial_gap = problem.eval_objective(&x0).stage("bounds")? - optimum.value;
    let dist_sq = optimum.point.as_ref().map(|p| linalg::dist_sq(&x0, p));
    let constants = BoundConstants {
        initial_gap: Some(initial_gap.max(0.0)),
        dist_sq,
        sigma: problem.convexity().pl_sigma(),
        blocks: Some(problem.partition().len()),
    };
    let kinds: Vec<BoundKind> = match cfg.engine {
        Engine::Piag => {
            let mut k = vec![BoundKind::PiagNonconvex];
            if problem.convexity().is_convex() && dist_sq.is_some() {
                k.push(BoundKind::PiagConvex);
            }
            if constants.sigma.is_some() {
                k.push(BoundKind::PiagPl);
            }
            k
        }
        Engine::Bcd => vec![BoundKind::BcdNonconvex],
    };
    let mut curves = Vec::new();
    let mut reports = Vec::new();
    let mut built = Vec::new();
    for kind in kinds {
        let curve = BoundCurve::new(kind, policy.clone(), constants, cfg.stepsum).stage("bounds")?;
        curves.push((kind, curve.eval_through(cfg.horizon).stage("bounds")?));
        reports.push(dominance_report(&curve, &trace).stage("bounds")?);
        built.push(curve);
    }

    let mut s = Summary::default();
    let engine = match cfg.engine {
        Engine::Piag => "piag",
        Engine::Bcd => "bcd",
    };
    s.put("engine", engine, Provenance::Config);
    s.put(
        "problem",
        match cfg.problem {
            ProblemFamily::Logistic => "logistic",
            ProblemFamily::Lasso => "lasso",
        },
        Provenance::Config,
    );
    s.put("dimension", problem.dimension(), Provenance::Config);
    s.put_config("lambda1", cfg.lambda1, Some(1e-5));
    s.put_config("lambda2", cfg.lambda2, Some(1e-4));
    s.put_config(
        "components",
        problem.n_components() as f64,
        (cfg.engine == Engine::Piag).then_some(10.0),
    );
    s.put_config(
        "blocks",
        problem.partition().len() as f64,
        (cfg.engine == Engine::Bcd).then_some(14.0),
    );
    if let Some(p) = cfg.processors {
        s.put_config("processors", p as f64, Some(8.0));
    }
    s.put_config("a", cfg.a, Some(0.1));
    s.put_config("b", cfg.b, None);
    s.put_config("c", cfg.c, Some(0.0));
    s.put(
        "delay",
        match &cfg.delay {
            DelaySource::Stochastic => "stochastic".to_string(),
            DelaySource::Adversarial => "adversarial".to_string(),
            DelaySource::File(p) => p.display().to_string(),
        },
        Provenance::Config,
    );
    s.put(
        "max_delay",
        delays.values()[..=cfg.horizon].iter().max().copied().unwrap_or(0),
        Provenance::Derived,
    );
    s.put("h", cfg.h, Provenance::Config);
    s.put("horizon", cfg.horizon, Provenance::Config);
    if cfg.engine == Engine::Bcd {
        s.put("trials", cfg.trials, Provenance::Config);
    }
    s.put(
        "schedule",
        match cfg.schedule {
            ScheduleSpec::Adaptive => "adaptive".to_string(),
            ScheduleSpec::Constant(step) => format!("constant:{step}"),
        },
        Provenance::Config,
    );
    s.put(
        "stepsum_source",
        match cfg.stepsum {
            StepsumSource::Exact => "exact",
            StepsumSource::ClosedForm => "closed_form",
        },
        Provenance::Config,
    );
    s.put("L", problem.smoothness().aggregate, Provenance::Derived);
    s.put("L_hat", problem.smoothness().blockwise, Provenance::Derived);
    s.put("P_star", optimum.value, Provenance::Derived);
    if let Some(r) = reference_residual {
        s.put("reference_residual", r, Provenance::Derived);
    }
    s.put("initial_gap", initial_gap, Provenance::Derived);
    if let Some(d) = dist_sq {
        s.put("dist_sq_to_reference_minimizer", d, Provenance::Derived);
    }
    if let Some(sigma) = constants.sigma {
        s.put("sigma", sigma, Provenance::Derived);
    }
    s.put("admissible", admissibility.passed(), Provenance::Derived);
    s.put("override_admissibility", cfg.override_admissibility, Provenance::Config);
    for curve in &built {
        match curve.kind() {
            BoundKind::PiagConvex => s.put("a0", curve.a0(), Provenance::Derived),
            BoundKind::PiagPl => {
                s.put("h_tilde", curve.h_tilde(), Provenance::Derived);
                s.put("beta", curve.beta().stage("bounds")?, Provenance::Derived);
                if policy.schedule_params().is_some() {
                    // Surrogate for the unspecified rate constant; implementation-defined.
                    s.put(
                        "lambda_diagnostic",
                        curve.lambda_diagnostic().stage("bounds")?,
                        Provenance::Derived,
                    );
                }
            }
            _ => {}
        }
    }
    if let Some(last) = trace.last() {
        if let Some(e) = last.objective_error {
            s.put("final_objective_error", e, Provenance::Derived);
        }
        s.put("final_running_best", last.running_best, Provenance::Derived);
    }
    if let Some(se) = &stderr {
        s.put(
            "final_scaled_best_stderr",
            se.last().copied().unwrap_or(0.0),
            Provenance::Derived,
        );
    }
    for r in &reports {
        s.put(
            format!("dominance.{}.violations", r.kind.name()),
            r.violations,
            Provenance::Derived,
        );
        s.put(
            format!("dominance.{}.max_ratio", r.kind.name()),
            r.max_ratio,
            Provenance::Derived,
        );
    }

    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).stage("output")?;
    fs::write(dir.join("config.txt"), cfg.to_text()).stage("output")?;
    write_file(&dir.join("delays.csv"), "output", |w| delays.write_csv(w))?;
    write_trace(&dir.join("trace.csv"), &trace)?;
    write_bounds(&dir.join("bound.csv"), &curves, cfg.horizon)?;
    if !trials.is_empty() {
        let tdir = dir.join("trials");
        fs::create_dir_all(&tdir).stage("output")?;
        for (i, t) in trials.iter().enumerate() {
            write_trace(&tdir.join(format!("trial_{i:03}.csv")), t)?;
        }
    }
    let text: String = s.0.iter().map(|e| format!("{e}\n")).collect();
    fs::write(dir.join("summary.txt"), text).stage("output")?;

    Ok(RunOutcome {
        dir,
        trace,
        trials,
        curves,
        reports,
        admissibility,
        summary: s.0,
    })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub b_values: Vec<f64>,
    pub runs: Vec<RunOutcome>,
    /// Last `k` present in every run.
    pub common_k: usize,
    pub errors_at_common_k: Vec<Option<f64>>,
    pub nondecreasing_in_b: bool,
    pub strictly_increasing_in_b: bool,
}

/// One run per `b` (in parallel) under `template.output/b_<b>/`, plus
/// `sweep.csv` (objective error per `b`) and `sweep_summary.txt`.
pub fn sweep(template: &ExperimentConfig, b_values: &[f64]) -> CliResult<SweepOutcome> {
    use rayon::prelude::*;

    if b_values.is_empty() {
        return Err(CliError::config("sweep", "no b values given"));
    }
    let configs: Vec<ExperimentConfig> = b_values
        .iter()
        .map(|&b| {
            let mut cfg = template.clone();
            cfg.b = b;
            cfg.output = template.output.join(format!("b_{b}"));
            cfg.validate().map(|_| cfg)
        })
        .collect::<CliResult<_>>()?;
    let runs: Vec<RunOutcome> = configs.par_iter().map(run_experiment).collect::<CliResult<_>>()?;

    let rows = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
    let common_k = rows.saturating_sub(1);
    let dir = &template.output;
    fs::create_dir_all(dir).stage("output")?;
    write_file(&dir.join("sweep.csv"), "output", |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        header.extend(b_values.iter().map(|b| format!("error_b={b}")));
        csv.write_record(&header)?;
        for idx in 0..rows {
            let mut row = vec![runs[0].trace.records[idx].k.to_string()];
            row.extend(runs.iter().map(|r| {
                r.trace.records[idx]
                    .objective_error
                    .map(|e| e.to_string())
                    .unwrap_or_default()
            }));
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })?;

    let errors: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.trace.records.get(common_k).and_then(|x| x.objective_error))
        .collect();
    let mut order: Vec<usize> = (0..b_values.len()).collect();
    order.sort_by(|&i, &j| b_values[i].total_cmp(&b_values[j]));
    let sorted: Vec<Option<f64>> = order.iter().map(|&i| errors[i]).collect();
    let all_known = sorted.iter().all(Option::is_some);
    let pairs = || sorted.windows(2).map(|w| (w[0].unwrap(), w[1].unwrap()));
    let nondecreasing_in_b = all_known && pairs().all(|(x, y)| x <= y);
    let strictly_increasing_in_b = all_known && pairs().all(|(x, y)| x < y);

    let mut text = format!("common_k = {common_k} [derived]\n");
    for (b, e) in b_values.iter().zip(&errors) {
        let v = e.map(|v| v.to_string()).unwrap_or_else(|| "unknown".into());
        text.push_str(&format!("error_at_common_k.b={b} = {v} [derived]\n"));
    }
    text.push_str(&format!("error_nondecreasing_in_b = {nondecreasing_in_b} [derived]\n"));
    text.push_str(&format!(
        "error_strictly_increasing_in_b = {strictly_increasing_in_b} [derived]\n"
    ));
    fs::write(dir.join("sweep_summary.txt"), text).stage("output")?;

    Ok(SweepOutcome {
        b_values: b_values.to_vec(),
        runs,
        common_k,
        errors_at_common_k: errors,
        nondecreasing_in_b,
        strictly_increasing_in_b,
    })
}
