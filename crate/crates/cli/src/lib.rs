//! `itf`: reproducible command-line runs of the incidental thyroid finding
//! pipeline, from synthetic corpus to paper-shaped tables.

pub mod analysis;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod tables;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::error::{CliError, Result, EXIT_USAGE};
use crate::manifest::Run;

/// Environment variable consulted for `--out` on commands that write a
/// directory.
pub const OUT_DIR_ENV: &str = "ITF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "itf", version, about = "Incidental thyroid finding pipeline")]
pub struct Cli {
    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
    /// TOML file with one table per subcommand; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic corpus with gold labels and timelines.
    Synth(commands::synth::Args),
    /// Classify reports and extract nodule attributes.
    Extract(commands::extract::Args),
    /// Select index studies and apply eligibility rules.
    Cohort(commands::cohort::Args),
    /// Link eligible patients to downstream thyroid care.
    Link(commands::link::Args),
    /// Produce the outcome tables, the multivariable model and diagnostics.
    Analyze(commands::analyze::Args),
    /// Score predictions against gold annotations.
    Eval(commands::eval::Args),
    /// Re-render tables from an aggregate counts file.
    Report(commands::report::Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::Cohort(_) => "cohort",
            Command::Link(_) => "link",
            Command::Analyze(_) => "analyze",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
        }
    }

    fn manifest_path(&self) -> PathBuf {
        match self {
            Command::Synth(a) => a.out.join(manifest::MANIFEST_FILE),
            Command::Extract(a) => manifest::beside(&a.out),
            Command::Cohort(a) => manifest::beside(&a.out),
            Command::Link(a) => manifest::beside(&a.out),
            Command::Analyze(a) => a.out.join(manifest::MANIFEST_FILE),
            Command::Eval(a) => manifest::beside(&a.out),
            Command::Report(a) => a.out_dir().join(manifest::MANIFEST_FILE),
        }
    }
}

/// The parsed `--config` file.
#[derive(Debug, Default)]
pub struct ConfigFile(Option<toml::Table>);

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self(None)) };
        io::require_file(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table = text.parse::<toml::Table>().map_err(|e| CliError::data(path.display().to_string(), e))?;
        Ok(Self(Some(table)))
    }

    /// The `[name]` table, or defaults when it is absent.
    pub fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T> {
        match self.0.as_ref().and_then(|t| t.get(name)) {
            None => Ok(T::default()),
            Some(v) => v.clone().try_into().map_err(|e| CliError::data(format!("config [{name}]"), e)),
        }
    }
}

/// Runs a parsed command line, writing the manifest whether or not the
/// command succeeds.
pub fn execute(cli: Cli) -> Result<()> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let threads = cli.threads as usize;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::data("thread pool", e))?;
    let mut run = Run::new(cli.command.name(), cli.command.manifest_path(), threads);
    let result = pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth::run(a, &config, &mut run),
        Command::Extract(a) => commands::extract::run(a, &config, &mut run),
        Command::Cohort(a) => commands::cohort::run(a, &config, &mut run),
        Command::Link(a) => commands::link::run(a, &config, &mut run),
        Command::Analyze(a) => commands::analyze::run(a, &config, &mut run),
        Command::Eval(a) => commands::eval::run(a, &config, &mut run),
        Command::Report(a) => commands::report::run(a, &config, &mut run),
    });
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let written = run.finish(&status);
    result.and(written.map(|_| ()))
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("itf: {e}");
            e.exit_code()
        }
    }
}
