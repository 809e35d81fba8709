//! Command-line front end. [`run`] parses arguments, merges them over the
//! config file, and writes every result under the output directory.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 unreadable or
//! malformed input data, 4 computation failure.

pub mod config;
mod commands;
mod output;
mod svg;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ArchitectureName, EstimateMode, EstimatorName, FileConfig, PanelFormat, ScenModeName, Study};
pub use output::Output;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }

    /// Input error prefixed with the offending file.
    pub(crate) fn input(path: &std::path::Path, e: impl fmt::Display) -> Self {
        let (path, msg) = (path.display().to_string(), e.to_string());
        if msg.starts_with(&path) {
            CliError::Input(msg)
        } else {
            CliError::Input(format!("{path}: {msg}"))
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Input(m) => write!(f, "input: {m}"),
            CliError::Compute(m) => write!(f, "computation: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<wealth_causal::Error> for CliError {
    fn from(e: wealth_causal::Error) -> Self {
        use wealth_causal::Error as E;
        match e {
            E::Io { .. } | E::Csv(_) | E::MissingColumn(_) | E::NonNumeric { .. } | E::DuplicateCell { .. } | E::GeoJson(_) => {
                CliError::Input(e.to_string())
            }
            E::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wealth-causal", version, about = "Panel causal estimates on predicted wealth outcomes")]
pub struct Cli {
    /// TOML file with a top-level `seed` and one table per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Household and cluster wealth index from an asset table.
    Index(IndexArgs),
    /// Effects on the treated with bootstrap intervals.
    Estimate(EstimateArgs),
    /// K-fold control CV, placebo prediction and the pre-trend test.
    Validate(ValidateArgs),
    /// Pre-trend bias, Berkson attenuation and test size simulations.
    Simulate(SimulateArgs),
    /// Slope and r² of bias-penalized surrogates over a λ_b grid.
    SweepLoss(SweepArgs),
    /// Treated/control/excluded groups from distances to grid lines.
    Assign(AssignArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Asset columns left out of the index; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<PanelFormat>,
    #[arg(long)]
    pub treatment: Option<PathBuf>,
    /// Use the bundled synthetic panel.
    #[arg(long)]
    pub demo: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    #[arg(long, value_enum)]
    pub mode: Option<EstimateMode>,
    /// Fixed penalty; skips cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated penalties to cross-validate over.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub scen_mode: Option<ScenModeName>,
    /// Bootstrap replicates; 0 skips the bootstrap.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub placebo_runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub studies: Option<Vec<String>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<usize>>,
    #[arg(long)]
    pub size_reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub lambda_b: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub architecture: Option<ArchitectureName>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub train_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub units: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub treat_buffer_km: Option<f64>,
    #[arg(long)]
    pub control_exclusion_km: Option<f64>,
}

fn parse_enum_list<T: clap::ValueEnum>(names: &[String], what: &str) -> Result<Vec<T>, CliError> {
    names
        .iter()
        .map(|n| T::from_str(n, true).map_err(|_| CliError::Config(format!("unknown {what} `{n}`"))))
        .collect()
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let (code, report) = run_captured(args);
    for line in report {
        println!("{line}");
    }
    code
}

/// Like [`run`] but returns the stdout lines instead of printing them.
/// Usage and error messages still go to stderr.
pub fn run_captured<I, S>(args: I) -> (i32, Vec<String>)
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return (if e.use_stderr() { EXIT_CONFIG } else { 0 }, Vec::new());
        }
    };
    match execute(cli) {
        Ok(report) => (0, report),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Vec::new())
        }
    }
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let mut file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out_dir = cli.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let threads = cli.threads.or(file.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out = Output::create(out_dir)?;

    pool.install(|| dispatch(cli.command, &mut file, seed, &out))?;
    Ok(out.into_report())
}

fn dispatch(command: Command, file: &mut FileConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    match command {
        Command::Index(a) => {
            let c = &mut file.index;
            if a.input.is_some() {
                c.input = a.input;
            }
            if !a.exclude.is_empty() {
                c.exclude = a.exclude;
            }
            out.echo("index", seed, c)?;
            commands::index::run(c, out)
        }
        Command::Estimate(a) => {
            let c = &mut file.estimate;
            apply_panel_args(a.panel, &mut c.panel, &mut c.format, &mut c.treatment, &mut c.demo);
            set(&mut c.estimator, a.estimator);
            set(&mut c.mode, a.mode);
            if a.lambda.is_some() {
                c.lambda = a.lambda;
            }
            set(&mut c.lambda_grid, a.lambda_grid);
            set(&mut c.alpha, a.alpha);
            set(&mut c.scen_mode, a.scen_mode);
            set(&mut c.bootstrap_reps, a.reps);
            out.echo("estimate", seed, c)?;
            commands::estimate::run(c, seed, out)
        }
        Command::Validate(a) => {
            let c = &mut file.validate;
            apply_panel_args(a.panel, &mut c.panel, &mut c.format, &mut c.treatment, &mut c.demo);
            if let Some(names) = a.estimators {
                c.estimators = parse_enum_list(&names, "estimator")?;
            }
            set(&mut c.folds, a.folds);
            set(&mut c.placebo_runs, a.placebo_runs);
            out.echo("validate", seed, c)?;
            commands::validate::run(c, seed, out)
        }
        Command::Simulate(a) => {
            let c = &mut file.simulate;
            if let Some(names) = a.studies {
                c.studies = parse_enum_list::<Study>(&names, "study")?;
            }
            set(&mut c.reps, a.reps);
            set(&mut c.rates, a.rates);
            set(&mut c.periods, a.periods);
            set(&mut c.size_reps, a.size_reps);
            out.echo("simulate", seed, c)?;
            commands::simulate::run(c, seed, out)
        }
        Command::SweepLoss(a) => {
            let c = &mut file.sweep_loss;
            set(&mut c.lambda_b, a.lambda_b);
            set(&mut c.architecture, a.architecture);
            set(&mut c.epochs, a.epochs);
            set(&mut c.train_n, a.train_n);
            out.echo("sweep-loss", seed, c)?;
            commands::sweep::run(c, seed, out)
        }
        Command::Assign(a) => {
            let c = &mut file.assign;
            if a.units.is_some() {
                c.units = a.units;
            }
            if a.grid.is_some() {
                c.grid = a.grid;
            }
            set(&mut c.treat_buffer_km, a.treat_buffer_km);
            set(&mut c.control_exclusion_km, a.control_exclusion_km);
            out.echo("assign", seed, c)?;
            commands::assign::run(c, out)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_panel_args(
    a: PanelArgs,
    panel: &mut Option<PathBuf>,
    format: &mut PanelFormat,
    treatment: &mut Option<PathBuf>,
    demo: &mut bool,
) {
    if a.panel.is_some() {
        *panel = a.panel;
    }
    set(format, a.format);
    if a.treatment.is_some() {
        *treatment = a.treatment;
    }
    *demo |= a.demo;
}
