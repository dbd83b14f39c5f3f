//! The `streetonomics` command line.
//!
//! ```text
//! streetonomics [--config FILE] [--city ID]... <ingest|enrich|metrics|map|validate|reproduce>
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 network error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod config;
pub mod pipeline;
pub mod provenance;

use config::{Overrides, RunConfig};
use pipeline::Pipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;

/// A mistake in how the tool was invoked or configured.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "streetonomics", version, about = "Quantify culture from honorific street names")]
pub struct Cli {
    /// Configuration file
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Only run these cities (repeatable)
    #[arg(long = "city", global = true)]
    pub cities: Vec<String>,
    /// Override the configured RNG seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use only the enrichment cache and recorded responses
    #[arg(long, global = true)]
    pub offline: bool,
    /// Use the literal foreigner-share formula
    #[arg(long, global = true)]
    pub strict_formulae: bool,
    /// Normalize district shares within each district
    #[arg(long, global = true)]
    pub within_district: bool,
    /// Never ask about ambiguous names
    #[arg(long, global = true)]
    pub no_prompt: bool,
    /// Re-run stages even when their outputs are up to date
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Parse the curated datasets and assign districts
    Ingest,
    /// Fill missing honoree fields from the knowledge base
    Enrich,
    /// Compute the decade series, rankings and district shares
    Metrics,
    /// Write district choropleths as GeoJSON
    Map,
    /// Draw the validation sample and estimate coverage
    Validate,
    /// Run every stage and write the summary tables
    Reproduce,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            offline: self.offline,
            strict_formulae: self.strict_formulae,
            within_district: self.within_district,
            no_prompt: self.no_prompt,
            force: self.force,
        }
    }
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e:#}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let path = RunConfig::locate(cli.config.as_deref());
    let cfg = RunConfig::load(&path, cli.overrides()).map_err(|e| UsageError(format!("{e:#}")))?;
    let cities = cfg.selected(&cli.cities).map_err(|e| UsageError(format!("{e:#}")))?;
    let mut p = Pipeline::new(&cfg);
    match cli.command {
        Command::Reproduce => return p.reproduce(&cities),
        cmd => {
            for city in cities {
                match cmd {
                    Command::Ingest => p.ingest(city)?,
                    Command::Enrich => p.enrich(city)?,
                    Command::Metrics => p.metrics(city)?,
                    Command::Map => p.map(city)?,
                    Command::Validate => p.validate(city)?,
                    Command::Reproduce => unreachable!(),
                }
            }
        }
    }
    Ok(())
}

/// Maps an error chain to an exit code.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<streetonomics::Error>() {
            return if err.is_network() { EXIT_NETWORK } else { EXIT_DATA };
        }
    }
    EXIT_DATA
}
