use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asyncopt::delay::{
    build_adversarial_delays, sample_stochastic_delays, validate_assumption1, Conformance, DelayParams, DelaySequence,
};
use asyncopt::schedule::{check_admissibility, Admissibility, StepSizePolicy};
use asyncopt_cli::config::KEYS;
use asyncopt_cli::{run_experiment, sweep, CliError, CliResult, ExperimentConfig, FailureKind};

#[derive(Parser)]
#[command(
    name = "asyncopt",
    about = "Asynchronous PIAG / Async-BCD experiments under growing delays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(ExperimentArgs),
    /// Run one experiment per b value and compare final errors.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Comma-separated b values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.6, 1.0])]
        b_values: Vec<f64>,
    },
    /// Check a delay CSV against the delay bound.
    ValidateDelays {
        #[arg(long)]
        file: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check the delay-matched schedule against a delay sequence.
    CheckAdmissibility {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0.99)]
        h: f64,
        /// Smoothness constant (L for PIAG, L-hat for BCD).
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        /// Delay CSV; when absent a sequence is generated.
        #[arg(long)]
        delays: Option<PathBuf>,
        /// `stochastic` or `adversarial` when generating.
        #[arg(long, default_value = "adversarial")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        components: usize,
    },
    /// Write the adversarial delay sequence as CSV.
    BuildAdversarial {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
}

impl ParamArgs {
    fn params(&self) -> CliResult<DelayParams> {
        DelayParams::new(self.a, self.b, self.c).map_err(|e| CliError::config("config", e.to_string()))
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    delay: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    batches: Option<String>,
    #[arg(long)]
    delay_seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Use the closed-form step-sum lower bound in bound curves.
    #[arg(long)]
    paper_faithful: bool,
    /// Run even when the schedule fails the admissibility check.
    #[arg(long)]
    override_admissibility: bool,
}

impl ExperimentArgs {
    fn into_config(self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        let named = [
            ("engine", self.engine),
            ("problem", self.problem),
            ("data", self.data),
            ("delay", self.delay),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("h", self.h),
            ("horizon", self.horizon),
            ("trials", self.trials),
            ("blocks", self.blocks),
            ("batches", self.batches),
            ("delay_seed", self.delay_seed),
            ("output", self.out),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for pair in &self.set {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::config(
                    "config",
                    format!("--set expects KEY=VALUE, got {pair:?} (keys: {})", KEYS.join(", ")),
                )
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        if self.paper_faithful {
            cfg.set("stepsum", "closed_form")?;
        }
        if self.override_admissibility {
            cfg.override_admissibility = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_delays(path: &PathBuf, params: DelayParams) -> CliResult<DelaySequence> {
    let file = File::open(path).map_err(|e| CliError::io("delays", e))?;
    DelaySequence::read_csv(file, params).map_err(|e| CliError::from_core("delays", e))
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let out = run_experiment(&cfg)?;
            for e in &out.summary {
                println!("{e}");
            }
            println!("artifacts written to {}", out.dir.display());
            Ok(())
        }
        Command::Sweep { experiment, b_values } => {
            let cfg = experiment.into_config()?;
            let out = sweep(&cfg, &b_values)?;
            for (b, e) in out.b_values.iter().zip(&out.errors_at_common_k) {
                match e {
                    Some(v) => println!("b = {b}: error at k = {} is {v:e}", out.common_k),
                    None => println!("b = {b}: error unknown"),
                }
            }
            println!("error strictly increasing in b: {}", out.strictly_increasing_in_b);
            println!("artifacts written to {}", cfg.output.display());
            Ok(())
        }
        Command::ValidateDelays { file, params } => {
            let p = params.params()?;
            let seq = read_delays(&file, p)?;
            match validate_assumption1(&seq, &p) {
                Conformance::Pass => {
                    println!("PASS: {} steps conform", seq.values().len());
                    Ok(())
                }
                Conformance::Fail { k } => Err(CliError {
                    stage: "validate",
                    kind: FailureKind::Runtime,
                    message: format!("FAIL at k = {k} (tau = {})", seq.values()[k]),
                }),
            }
        }
        Command::CheckAdmissibility {
            params,
            h,
            smoothness,
            horizon,
            delays,
            kind,
            seed,
            components,
        } => {
            let p = params.params()?;
            let seq = match (&delays, kind.as_str()) {
                (Some(path), _) => read_delays(path, p)?,
                (None, "adversarial") => {
                    build_adversarial_delays(p, horizon).map_err(|e| CliError::from_core("delays", e))?
                }
                (None, "stochastic") => sample_stochastic_delays(p, horizon, components, seed)
                    .map_err(|e| CliError::from_core("delays", e))?,
                (None, other) => return Err(CliError::config("config", format!("unknown delay kind {other:?}"))),
            };
            let policy =
                StepSizePolicy::piag(h, smoothness, p).map_err(|e| CliError::config("config", e.to_string()))?;
            match check_admissibility(&policy, seq.values(), horizon)
                .map_err(|e| CliError::from_core("admissibility", e))?
            {
                Admissibility::Pass => {
                    println!("PASS: admissible through k = {horizon}");
                    Ok(())
                }
                Admissibility::Fail { k, window_sum, limit } => Err(CliError {
                    stage: "admissibility",
                    kind: FailureKind::Admissibility,
                    message: format!("FAIL at k = {k}: window sum {window_sum:e} > {limit:e}"),
                }),
            }
        }
        Command::BuildAdversarial { params, horizon, out } => {
            let seq =
                build_adversarial_delays(params.params()?, horizon).map_err(|e| CliError::from_core("delays", e))?;
            let w = BufWriter::new(File::create(&out).map_err(|e| CliError::io("output", e))?);
            seq.write_csv(w).map_err(|e| CliError::from_core("output", e))?;
            println!("epoch starts: {:?}", seq.epoch_starts().unwrap_or(&[]));
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
