//! `warpfield`: simulate, fit, predict, bootstrap, homogenize and run
//! simulation studies from a TOML configuration.

mod commands;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use warpfield_core::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "warpfield", version, about = "Warped multivariate spatial models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WARPFIELD_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Simulate a study and write the observations, truth and hold-out mask.
    Simulate,
    /// Fit the first configured model and write a JSON report.
    Fit,
    /// Predict at the configured or simulated hold-out locations.
    Predict {
        /// Reuse a fit report instead of refitting.
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Parametric bootstrap of the first configured model.
    Bootstrap,
    /// Write homogenized warped locations of a fit.
    Homogenize {
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Fit every configured model on every seed and tabulate the scores.
    Experiment,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad usage, configuration or input: exit 1.
    Usage(String),
    /// Numerical breakdown: exit 2.
    Numerical(String),
}

impl From<warpfield_core::Error> for CliError {
    fn from(e: warpfield_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    } else {
        cfg.fit.seed = cfg.seed;
        cfg.bootstrap.seed = cfg.seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Predict { fit } => commands::predict(&cfg, fit.as_deref()),
        Command::Bootstrap => commands::bootstrap(&cfg),
        Command::Homogenize { fit } => commands::homogenize(&cfg, fit.as_deref()),
        Command::Experiment => commands::experiment(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(2)
        }
    }
}
