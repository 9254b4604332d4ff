//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when power
//! iteration fails beyond the trial exclusion policy.

pub mod config;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

pub use config::ExperimentConfig;
pub use pipeline::{run_experiment, Manifest, RunFlags, RunOutcome, Subcommand};
pub use report::emit_report;

use crate::error::LabError;
use crate::probbounds::BoundKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mtlab", version, about = "Weighted Fourier extension experiments")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output root; overrides MTLAB_OUT and output.directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override run.masterSeed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override run.N.
    #[arg(long = "trials")]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WeightSource {
    /// Weight JSON instead of a sampled weight.
    #[arg(long)]
    pub weight: Option<PathBuf>,
    /// Trial index whose derived seed draws the weight.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Sample one weight and write it as JSON.
    GenerateWeight {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Top eigenvalue of one weighted Gram matrix.
    MtFunctional {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: WeightSource,
        /// Also write the Gram matrix as gram.bin.
        #[arg(long)]
        dump_gram: bool,
    },
    /// Monte Carlo mean of the functional over N weights.
    ExpectedMt {
        #[command(flatten)]
        common: Common,
    },
    /// Expected functional, mass and tube occupancy across radii.
    ScalingStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Largest tube occupancy of one weight.
    TubeSup {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: WeightSource,
    },
    /// Empirical tails against closed-form bounds.
    TailStudy {
        /// bennett, selector or chernoff-tube; must match the config if given.
        bound: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerated or sampled nets for a random balanced hull.
    MaureyNet {
        #[command(flatten)]
        common: Common,
    },
    /// Packing witnesses for covering numbers of the unit ball.
    CoveringCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Summaries and plot data for a directory of runs.
    Report {
        directory: PathBuf,
    },
}

pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        LabError::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.run.master_seed = s;
    }
    if let Some(n) = common.trials {
        cfg.run.trials = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<String, LabError> {
    let (sub, common, flags) = match command {
        Command::Report { directory } => {
            let report = emit_report(&directory)?;
            return Ok(format!("{}written to {}", report.summary, report.directory.display()));
        }
        Command::GenerateWeight { common, index } => (
            Subcommand::GenerateWeight,
            common,
            RunFlags {
                index,
                ..RunFlags::default()
            },
        ),
        Command::MtFunctional {
            common,
            source,
            dump_gram,
        } => (
            Subcommand::MtFunctional,
            common,
            RunFlags {
                weight: source.weight,
                index: source.index,
                dump_gram,
                ..RunFlags::default()
            },
        ),
        Command::ExpectedMt { common } => (Subcommand::ExpectedMt, common, RunFlags::default()),
        Command::ScalingStudy { common } => (Subcommand::ScalingStudy, common, RunFlags::default()),
        Command::TubeSup { common, source } => (
            Subcommand::TubeSup,
            common,
            RunFlags {
                weight: source.weight,
                index: source.index,
                ..RunFlags::default()
            },
        ),
        Command::TailStudy { bound, common } => {
            if let Some(b) = bound {
                let b: BoundKind = b.parse()?;
                let cfg = load(&common)?;
                if cfg.tail.as_ref().is_some_and(|t| t.bound != b) {
                    return Err(LabError::config(format!("config's tail.bound is not {b}")));
                }
            }
            (Subcommand::TailStudy, common, RunFlags::default())
        }
        Command::MaureyNet { common } => (Subcommand::MaureyNet, common, RunFlags::default()),
        Command::CoveringCheck { common } => (Subcommand::CoveringCheck, common, RunFlags::default()),
    };
    let cfg = load(&common)?;
    let flags = RunFlags {
        out: common.out.clone(),
        ..flags
    };
    let outcome = run_experiment(sub, &cfg, &flags)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(outcome.directory.display().to_string()),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_IO;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
