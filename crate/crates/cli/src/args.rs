//! Command-line and config-file arguments. Every option may also be given in
//! a TOML file (`--config`), either at top level or under a table named after
//! the subcommand; flags take precedence over the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;
use crate::provenance::open;

#[derive(Debug, Parser)]
#[command(name = "greybox", version, about = "Grey-box nonlinear state-space identification of mechanical vibrations")]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a multisine dataset from a mechanical system.
    Simulate(SimulateArgs),
    /// Subspace identification, optionally refined by maximum likelihood.
    Identify(IdentifyArgs),
    /// Physical nonlinear coefficients from an identified model.
    Convert(ConvertArgs),
    /// Plot-ready spectra, time series or FRFs.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Trigonometric,
    ZeroOrderHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Subspace,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    /// Measured output, model errors and noise level per line.
    Spectra,
    /// One period of measured output and model errors.
    Time,
    /// Extended FRFs of the given models.
    Frf,
}

macro_rules! mergeable {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Fields unset on the command line are taken from `other`.
            pub fn or(self, other: Self) -> Self {
                Self { config: self.config, $($field: self.$field.or(other.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    /// TOML config file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset file to write.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Mechanical system file; the virtual Silverbox when omitted.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Input RMS level (0.15 for the high, 0.005 for the low level).
    #[arg(long)]
    pub rms: Option<f64>,
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long)]
    pub period_length: Option<usize>,
    /// Periods written after settling.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Periods simulated and discarded before the kept ones.
    #[arg(long)]
    pub settle: Option<usize>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add white output noise at this SNR.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// RK4 steps per sample.
    #[arg(long)]
    pub oversampling: Option<usize>,
    #[arg(long, value_enum)]
    pub interpolation: Option<Interpolation>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}
mergeable!(SimulateArgs { output, system, rms, fs, period_length, periods, settle, f_min, f_max, seed, snr_db, oversampling, interpolation, format });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct IdentifyArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output prefix: writes `<prefix>.initial.model`, `<prefix>.final.model`,
    /// `<prefix>.trace.csv` and `<prefix>.diagram.csv` as applicable.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Starting model for `--method ml`.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Basis monomial as `channel:derivative:exponent` triples joined by
    /// commas; repeat for each function, or `none` for a linear model.
    #[arg(long)]
    pub basis: Option<Vec<String>>,
    #[arg(long)]
    pub block_rows: Option<usize>,
    /// Highest excited frequency; defaults to the dataset's excited band.
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Processed lines `first:last` (inclusive) instead of the default set.
    #[arg(long)]
    pub lines: Option<String>,
    /// Weight the subspace step by the estimated output noise.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub noise_weighting: Option<bool>,
    /// Model orders `first:last` for a stabilisation diagram.
    #[arg(long)]
    pub orders: Option<String>,
    /// Write the stabilisation diagram CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub diagram: Option<bool>,
    /// Refine the subspace model by maximum likelihood.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub optimize: Option<bool>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Settling periods for model simulation during refinement.
    #[arg(long)]
    pub settle: Option<usize>,
}
mergeable!(IdentifyArgs {
    data, output, method, init, order, basis, block_rows, f_max, lines, noise_weighting, orders, diagram, optimize,
    max_iterations, settle
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConvertArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset supplying the period length and excited lines.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub period_length: Option<usize>,
    /// Lines `first:last` (inclusive); defaults to the dataset's excited lines.
    #[arg(long)]
    pub lines: Option<String>,
    #[arg(long)]
    pub force_input: Option<usize>,
    #[arg(long)]
    pub nl_output: Option<usize>,
    /// Force per unit of the force input; defaults to the dataset's value or 1.
    #[arg(long)]
    pub force_per_input_unit: Option<f64>,
    /// Coefficient CSV to write.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
mergeable!(ConvertArgs { model, data, period_length, lines, force_input, nl_output, force_per_input_unit, output });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExportArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<ExportKind>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model before refinement.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Model after refinement.
    #[arg(long)]
    pub r#final: Option<PathBuf>,
    /// Upper edge of the exported band; defaults to the excited band.
    #[arg(long)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub settle: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
mergeable!(ExportArgs { kind, data, initial, r#final, f_max, settle, output });

/// Reads the subcommand's table (or the top level) of a TOML config file.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>, command: &str) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut text)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text.parse().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let section = match table.remove(command) {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(Failure::Usage(format!("{}: '{command}' must be a table", path.display()))),
        None => table,
    };
    section.try_into().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, Failure> {
    value.clone().ok_or_else(|| Failure::Usage(format!("missing required option --{flag}")))
}

/// Inclusive `first:last`.
pub fn parse_range(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("{what} must be 'first:last', got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if b < a {
        return Err(Failure::Usage(format!("{what} '{s}' is empty")));
    }
    Ok((a..=b).collect())
}
