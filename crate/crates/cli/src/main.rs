//! `loadcast`: the forecasting pipeline as subcommands over one work directory.

mod commands;
mod config;

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::CliConfig;

#[derive(Debug, Parser)]
#[command(
    name = "loadcast",
    version,
    about = "Hourly electricity-demand forecasting pipeline"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Work directory holding every stage's artifacts
    #[arg(long, global = true, env = "LOADCAST_WORKDIR", default_value = "work")]
    pub workdir: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// full | paper-table2
    #[arg(long, global = true)]
    pub feature_set: Option<String>,
    /// default | paper
    #[arg(long, global = true)]
    pub accounting: Option<String>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// e.g. 64x128x128x64
    #[arg(long, global = true)]
    pub architecture: Option<String>,
    #[arg(long, global = true)]
    pub activation: Option<String>,
    #[arg(long, global = true)]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub dropout: Option<f64>,
    #[arg(long, global = true)]
    pub shuffle: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic set of raw sources
    Generate {
        #[arg(long)]
        days: Option<usize>,
    },
    /// Parse the raw sources into the hourly table
    Ingest,
    /// Impute gaps and correct outliers
    Preprocess,
    /// Build normalized windows and the split plan
    Featurize,
    /// Train one network
    Train,
    /// Score the trained network, or a predictions CSV (timestamp,actual,predicted)
    Evaluate {
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Train the architecture sweep
    GridArch,
    /// Train the activation x optimizer x batch sweep
    GridHyper,
    /// Train one configuration under many seeds
    SeedStudy {
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Random-forest baseline and feature importances
    BaselineRf,
    /// Periodogram, autocorrelation, temperature fits and demand mixture
    Analyze,
    /// Collect every CSV into report/ with SVG charts
    Report,
}

/// Failures mapped onto the process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<loadcast::Error> for CliError {
    fn from(e: loadcast::Error) -> Self {
        match e {
            loadcast::Error::Config(m) => CliError::Usage(format!("invalid configuration: {m}")),
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl GlobalArgs {
    /// Defaults, then the config file, then flags.
    fn effective_config(&self) -> Result<CliConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => CliConfig::load(p).map_err(CliError::Usage)?,
            None => CliConfig::default(),
        };
        if let Some(v) = self.seed {
            c.run.seed = v;
        }
        if let Some(v) = &self.feature_set {
            c.data.feature_set = v.clone();
        }
        if let Some(v) = &self.accounting {
            c.data.accounting = v.clone();
        }
        if let Some(v) = self.workers {
            c.run.workers = v;
        }
        if let Some(v) = &self.architecture {
            c.train.architecture = v.clone();
        }
        if let Some(v) = &self.activation {
            c.train.activation = v.clone();
        }
        if let Some(v) = &self.optimizer {
            c.train.optimizer = v.clone();
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.max_epochs {
            c.train.max_epochs = v;
        }
        if let Some(v) = self.dropout {
            c.train.dropout = v;
        }
        if let Some(v) = self.shuffle {
            c.train.shuffle = v;
        }
        Ok(c)
    }
}

/// Exclusive claim on a work directory, released on drop.
struct WorkdirLock {
    path: PathBuf,
    _file: File,
}

impl WorkdirLock {
    fn acquire(workdir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(workdir).map_err(|e| {
            CliError::Data(format!(
                "cannot create work directory {}: {e}",
                workdir.display()
            ))
        })?;
        let path = workdir.join(".loadcast.lock");
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                CliError::Usage(format!(
                    "work directory {} is in use ({e}); remove {} if no other run is active",
                    workdir.display(),
                    path.display()
                ))
            })?;
        Ok(WorkdirLock { path, _file: file })
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn run() -> Result<(), CliError> {
    let help = config::help_table();
    let matches = Cli::command()
        .after_long_help(help.clone())
        .after_help(help)
        .try_get_matches();
    let matches = match matches {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = cli.global.effective_config()?;
    let resolved = config
        .resolve()
        .map_err(|m| CliError::Usage(format!("invalid configuration:\n{m}")))?;
    let _lock = WorkdirLock::acquire(&cli.global.workdir)?;
    let ctx = commands::Context {
        workdir: cli.global.workdir.clone(),
        config,
        resolved,
    };
    commands::dispatch(&ctx, &cli.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
