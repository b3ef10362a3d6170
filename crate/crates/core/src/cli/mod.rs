//! Experiment harness behind the `smg` binary: single runs, grid search, rate
//! fits, method comparisons, bound audits and dataset inspection.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime abort or violated check,
//! 3 audit refused because the run does not meet a bound's premises.

mod commands;
mod config;
mod grid;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    applicable_theorem, audit_records, cmd_audit, cmd_compare, cmd_parse, cmd_rate, cmd_run, compare, execute,
    AuditOutcome, CompareEntry, Comparison, RunOutcome, DEFAULT_HORIZONS,
};
pub use config::{
    canonical_hash, load_config, resolve_data_path, step_cap, ExperimentConfig, ProblemSpec, ScheduleSpec,
    DATA_DIR_ENV,
};
pub use grid::{apply_point, reference_grids, product, run_grid, run_reference_grid, write_grid, GridPoint, GridRow, ReferenceGrids};

use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, ADAM_EPSILON};
use crate::schedules::ScheduleKind;
use crate::shuffling::ShufflingKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::Json(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
        Error::PremisesUnmet(_) => EXIT_REFUSED,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Debug, Parser)]
#[command(name = "smg", version, about = "Shuffling momentum gradient experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration for `--repeats` seeds and write traces.
    Run(RunArgs),
    /// Grid search over rates and schedule parameters, ranked by final train loss.
    Grid(GridArgs),
    /// Fit the log-log slope of the weighted gradient norm against T.
    Rate(RateArgs),
    /// Loss curves of several methods from a shared start and shared seeds.
    Compare(CompareArgs),
    /// Audit runs against the matching convergence bound.
    Audit(AuditArgs),
    /// Parse a LIBSVM file and print its size and checksum.
    Parse(ParseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    /// Logistic regression on seeded Gaussian data.
    Synthetic,
    /// Random strongly convex quadratic with exact constants.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Smg,
    Ssmg,
    Sgd,
    Sgdm,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Constant,
    Diminishing,
    Exponential,
    Cosine,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON config (or a trace sidecar) to use instead of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// LIBSVM dataset; relative paths are also looked up under $SMG_DATA_DIR.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProblemArg::Synthetic)]
    pub problem: ProblemArg,
    /// Components of a synthetic problem.
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Dimension of a synthetic problem.
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,
    /// 1 keeps every planted label, 0 flips half of them.
    #[arg(long, default_value_t = 0.9)]
    pub separability: f64,
    /// Weight of the nonconvex regularizer.
    #[arg(long, default_value_t = 0.01)]
    pub reg_lambda: f64,
    /// Divide each feature by its largest absolute value.
    #[arg(long)]
    pub scale_features: bool,

    #[arg(long, value_enum, default_value_t = AlgoArg::Smg)]
    pub algo: AlgoArg,
    /// Momentum weight of smg/ssmg.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Heavy-ball coefficient of sgdm.
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0.9)]
    pub adam_beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub adam_beta2: f64,

    #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
    pub schedule: ScheduleArg,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Offset of the diminishing schedule.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Total decay of the exponential schedule over the horizon.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Multiply gamma by n^(1/3).
    #[arg(long)]
    pub rr_scaling: bool,
    /// Number of epochs.
    #[arg(long = "T", short = 'T', default_value_t = 50)]
    pub horizon: usize,
    /// rr, once or inc.
    #[arg(long, default_value = "rr")]
    pub strategy: ShufflingKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Scale gamma down to the step-size cap of the matching bound.
    #[arg(long)]
    pub enforce_cap: bool,
    /// Standard deviation of the Gaussian initial point.
    #[arg(long, default_value_t = 0.01)]
    pub w0_scale: f64,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl ExperimentArgs {
    pub fn algorithm(&self, algo: AlgoArg) -> Algorithm {
        match algo {
            AlgoArg::Smg => Algorithm::Smg { beta: self.beta },
            AlgoArg::Ssmg => Algorithm::Ssmg { beta: self.beta },
            AlgoArg::Sgd => Algorithm::Sgd,
            AlgoArg::Sgdm => Algorithm::Sgdm { momentum: self.momentum },
            AlgoArg::Adam => Algorithm::Adam { beta1: self.adam_beta1, beta2: self.adam_beta2, eps: ADAM_EPSILON },
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return load_config(path);
        }
        let problem = match (&self.data, self.problem) {
            (Some(path), _) => ProblemSpec::Libsvm {
                path: path.clone(),
                reg_lambda: self.reg_lambda,
                scale_features: self.scale_features,
            },
            (None, ProblemArg::Synthetic) => ProblemSpec::Synthetic {
                n: self.n,
                d: self.d,
                seed: self.data_seed,
                separability: self.separability,
                reg_lambda: self.reg_lambda,
            },
            (None, ProblemArg::Quadratic) => ProblemSpec::Quadratic { n: self.n, d: self.d, seed: self.data_seed },
        };
        let shape = match self.schedule {
            ScheduleArg::Constant => ScheduleKind::Constant,
            ScheduleArg::Diminishing => ScheduleKind::Diminishing { lambda: self.lambda },
            ScheduleArg::Exponential => ScheduleKind::Exponential { rho: self.rho },
            ScheduleArg::Cosine => ScheduleKind::Cosine,
        };
        let cfg = ExperimentConfig {
            problem,
            algorithm: self.algorithm(self.algo),
            schedule: ScheduleSpec { shape, gamma: self.gamma, rr_scaling: self.rr_scaling },
            strategy: self.strategy,
            horizon: self.horizon,
            seed: self.seed,
            repeats: self.repeats,
            enforce_cap: self.enforce_cap,
            w0_scale: self.w0_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Attach a bound report to every trace.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Rates to try; defaults to --gamma.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Vec<f64>,
    /// Diminishing-schedule offsets to try.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// Exponential-schedule decays to try.
    #[arg(long, value_delimiter = ',')]
    pub rhos: Vec<f64>,
    /// Momentum weights to try.
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Use the reference coarse-then-fine grids for the chosen method and schedule.
    #[arg(long = "paper-grids")]
    pub reference_grids: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HORIZONS)]
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [AlgoArg::Smg, AlgoArg::Ssmg, AlgoArg::Sgd, AlgoArg::Sgdm, AlgoArg::Adam])]
    pub algos: Vec<AlgoArg>,
    /// Per-method rate overrides, e.g. `adam=0.001,sgd=0.1`.
    #[arg(long, value_delimiter = ',', value_parser = parse_rate_override)]
    pub rates: Vec<(AlgoArg, f64)>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Also run the algebraic identity suite.
    #[arg(long)]
    pub identities: bool,
    /// Epochs used by the identity suite.
    #[arg(long, default_value_t = 8)]
    pub identity_epochs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ParseArgs {
    /// LIBSVM file; relative paths are also looked up under $SMG_DATA_DIR.
    pub path: PathBuf,
    /// Fail unless the file holds exactly this many samples.
    #[arg(long)]
    pub expect_n: Option<usize>,
}

fn parse_rate_override(s: &str) -> std::result::Result<(AlgoArg, f64), String> {
    let (name, rate) = s.split_once('=').ok_or_else(|| format!("expected algo=rate, got `{s}`"))?;
    let algo = AlgoArg::from_str(name, true)?;
    let rate = rate.parse::<f64>().map_err(|e| format!("bad rate in `{s}`: {e}"))?;
    Ok((algo, rate))
}

/// Runs a parsed command and returns its exit code. Output goes to `out`,
/// diagnostics to `err`.
pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_command(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run_command(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run(a) => {
            let cfg = a.exp.to_config()?;
            let outcome = cmd_run(&cfg, &a.exp.out, a.audit, out)?;
            Ok(match outcome.report {
                Some(r) if !r.satisfied => EXIT_RUNTIME,
                _ => EXIT_OK,
            })
        }
        Command::Grid(a) => {
            let cfg = a.exp.to_config()?;
            let rows = if a.reference_grids {
                run_reference_grid(&cfg, a.jobs)?
            } else {
                let gammas = if a.gammas.is_empty() { vec![cfg.schedule.gamma] } else { a.gammas.clone() };
                run_grid(&cfg, &product(&gammas, &a.lambdas, &a.rhos, &a.betas), a.jobs)?
            };
            write_grid(&rows, &a.exp.out, out)?;
            Ok(if rows[0].final_loss.is_some() { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::Rate(a) => {
            let cfg = a.exp.to_config()?;
            cmd_rate(&cfg, &a.horizons, &a.exp.out, out)?;
            Ok(EXIT_OK)
        }
        Command::Compare(a) => {
            let cfg = a.exp.to_config()?;
            let entries: Vec<CompareEntry> = a
                .algos
                .iter()
                .map(|&algo| CompareEntry {
                    label: a.exp.algorithm(algo).name(),
                    algorithm: a.exp.algorithm(algo),
                    gamma: a.rates.iter().rev().find(|(x, _)| *x == algo).map_or(cfg.schedule.gamma, |r| r.1),
                })
                .collect();
            cmd_compare(&cfg, &entries, &a.exp.out, out)?;
            Ok(EXIT_OK)
        }
        Command::Audit(a) => {
            let cfg = a.exp.to_config()?;
            let outcome = cmd_audit(&cfg, &a.exp.out, a.identities, a.identity_epochs, out)?;
            Ok(if outcome.passed() { EXIT_OK } else { EXIT_RUNTIME })
        }
        Command::Parse(a) => {
            let meta = cmd_parse(&a.path, out)?;
            match a.expect_n {
                Some(n) if n != meta.n => {
                    Err(Error::Parse { line: 0, message: format!("expected {n} samples, found {}", meta.n) })
                }
                _ => Ok(EXIT_OK),
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command against stdout/stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock()),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
