//! Command-line orchestration of the localization experiments.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use report::{write_outputs, Check, ConfigError, Report};

#[derive(Debug, Parser)]
#[command(name = "achronal", version, about = "Localization experiments for the massive scalar boson")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<config::BackendName>,
    /// Multiplies every tolerance.
    #[arg(long)]
    pub tolerance_scale: Option<f64>,
}

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed = 0,
    Failed = 1,
    ConfigError = 2,
}

impl Cli {
    /// Loads the configuration and applies command-line overrides.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(s) = self.tolerance_scale {
            if !(s > 0.0 && s.is_finite()) {
                anyhow::bail!("tolerance scale must be positive, got {s}");
            }
            cfg.tolerances = cfg.tolerances.scaled(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments, runs the command, writes outputs and returns the exit
/// status: 0 when every check passes, 1 on a failed check or runtime error,
/// 2 on configuration errors.
pub fn main_with_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Outcome::ConfigError } else { Outcome::Passed };
        }
    };
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return Outcome::ConfigError;
        }
    };
    let report = match run(cli.command, &cfg) {
        Ok(r) => r,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("{e:#}");
            return Outcome::ConfigError;
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return Outcome::Failed;
        }
    };
    if let Err(e) = write_outputs(&report, &cfg, &cfg.output_dir) {
        eprintln!("error writing outputs: {e:#}");
        return Outcome::Failed;
    }
    for c in &report.checks {
        println!("{} {} value={:e} tolerance={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    if report.passed() {
        Outcome::Passed
    } else {
        Outcome::Failed
    }
}
