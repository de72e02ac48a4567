//! Command line front end for `vexp-core`: TOML run configurations,
//! experiment orchestration and CSV reports.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, Experiment, RunConfig};
pub use run::{run, Check, Outcome, RunError};

#[derive(Debug, Parser)]
#[command(name = "vexp", version, about = "Mountain-pass experiments for variable-exponent Schrödinger problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mountain-pass solve for each configured truncation variant.
    Solve(CommonArgs),
    /// Sample-based checks of the structural hypotheses.
    CheckHypotheses(CommonArgs),
    /// Cone lemma, blow-down and sphere geometry.
    VerifyGeometry(CommonArgs),
    /// Tail decay across nested truncation radii.
    DecayStudy(CommonArgs),
    /// Tail-subspace constants and the symmetric minimax premises.
    Multiplicity(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn split(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Solve(a) => (Experiment::Solve, a),
            Command::CheckHypotheses(a) => (Experiment::CheckHypotheses, a),
            Command::VerifyGeometry(a) => (Experiment::VerifyGeometry, a),
            Command::DecayStudy(a) => (Experiment::DecayStudy, a),
            Command::Multiplicity(a) => (Experiment::Multiplicity, a),
        }
    }
}

/// Reads `VEXP_THREADS` (unset or 0 means one worker per core) and sizes
/// the global worker pool once per process.
pub fn configure_threads() -> Result<(), ConfigError> {
    let threads = match std::env::var("VEXP_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| ConfigError::Invalid {
            key: "VEXP_THREADS",
            reason: format!("`{v}` is not a non-negative integer"),
        })?,
        Err(_) => 0,
    };
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Loads the configuration named by `args` and applies the flag overrides.
pub fn resolve(args: &CommonArgs) -> Result<(RunConfig, PathBuf), ConfigError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok((config, out))
}

/// Runs the command line `args` (program name first) and returns the
/// process exit code: 0 when every certification passed, 2 when some
/// failed, 1 on usage or configuration errors.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    let (experiment, args) = cli.command.split();
    let (config, out) = match resolve(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(experiment, &config, &out) {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
