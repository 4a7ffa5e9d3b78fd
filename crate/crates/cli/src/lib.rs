//! `calibra`: batch front end over the `calibra` core library.
//!
//! Each run reads one job file (`--spec`), writes its artifacts into one
//! directory (`--out`) and exits with 0 on success, 2 when an input is
//! malformed or violates a precondition, and 3 when a numerical procedure
//! fails to converge or a claim could not be verified.

mod commands;
mod job;
mod output;

use std::fmt;
use std::path::PathBuf;

use calibra::lawlor::{Control, Normalization};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use job::{JobFile, ModelSpec, Source};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<calibra::Error> for CliError {
    fn from(e: calibra::Error) -> Self {
        match e {
            calibra::Error::NonConvergence(_) => CliError::numeric(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ControlArg {
    #[value(name = "F")]
    F,
    #[value(name = "c")]
    C,
    #[value(name = "custom")]
    Custom,
}

impl From<ControlArg> for Control {
    fn from(c: ControlArg) -> Self {
        match c {
            ControlArg::F => Control::F,
            ControlArg::C => Control::C,
            ControlArg::Custom => Control::Custom,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    #[value(name = "eq42")]
    Eq42,
    #[value(name = "paper-k")]
    PaperK,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Eq42 => Normalization::Eq42,
            NormalizationArg::PaperK => Normalization::PaperK,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Comass of a constant form under a metric.
    Comass,
    /// Comass along the segment of metrics between two endpoints.
    GlueSweep,
    /// Vanishing angles of the two closed-form controls over a (k, α) grid.
    VanishingTable,
    /// Lawlor's criterion for the cone over a link or an explicit model.
    CertifyCone,
    /// Hemisphere obstruction to constant calibrations of a product cone.
    Obstruct,
    /// Smallest n for which n copies of a base link pass the criterion.
    Replicate,
    /// Check the job file and everything it references without running it.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Comass => "comass",
            Command::GlueSweep => "glue-sweep",
            Command::VanishingTable => "vanishing-table",
            Command::CertifyCone => "certify-cone",
            Command::Obstruct => "obstruct",
            Command::Replicate => "replicate",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "calibra", version, about = "Comass, gluing, Lawlor-criterion and obstruction jobs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Job file (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Output directory; required except for `validate`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Criterion control; defaults to `custom` for certify-cone and `F` for
    /// replicate.
    #[arg(long, global = true, value_enum)]
    pub control: Option<ControlArg>,
    /// The command's principal tolerance: optimizer tolerance (comass),
    /// violation threshold (glue-sweep), ODE absolute tolerance (Lawlor
    /// commands) or hemisphere band (obstruct).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Grid size: s-points (glue-sweep), α-points when the job lists none
    /// (vanishing-table), or link samples (certify-cone, replicate, obstruct).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "eq42")]
    pub normalization: NormalizationArg,
    /// Also emit long-format CSV for external plotting.
    #[arg(long, global = true)]
    pub plot_data: bool,
}

/// Recorded at the top of every report and in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct JobHeader {
    pub command: &'static str,
    pub spec: Option<String>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub control: Option<String>,
    pub normalization: &'static str,
    pub plot_data: bool,
}

impl Cli {
    pub fn header(&self) -> JobHeader {
        JobHeader {
            command: self.command.name(),
            spec: self.spec.as_ref().map(|p| p.display().to_string()),
            seed: self.seed,
            tol: self.tol,
            grid: self.grid,
            control: self.control.map(|c| Control::from(c).to_string()),
            normalization: Normalization::from(self.normalization).name(),
            plot_data: self.plot_data,
        }
    }
}

/// What a finished run reports on the terminal.
#[derive(Debug)]
pub struct RunSummary {
    pub code: i32,
    pub lines: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    commands::run(cli)
}
