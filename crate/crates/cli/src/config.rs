//! Command-line flags and the optional TOML config file.
//!
//! Every flag is optional at parse time. A config file supplies values for
//! anything the command line leaves unset; top-level keys mirror the global
//! flags and each subcommand reads its own table:
//!
//! ```toml
//! seed = 7
//! format = "json"
//!
//! [dudley]
//! points = "cloud.csv"
//! sigma = 0.5
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "chainbound", version, about = "Numerical checks for covering, concentration and chaining bounds")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    /// Structured config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// Master seed; every random substream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Number of repeated trials or instances.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

/// Global settings after merging flags, file and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn require_seed(&self, subcommand: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("{subcommand} is stochastic and needs --seed")))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy profile (packing lower bound, greedy upper bound) of a point set.
    Cover(CoverArgs),
    /// Entropy integral and dyadic entropy sums of a point set.
    Entropy(EntropyArgs),
    /// Exact-enumeration checks on small product spaces.
    DiscreteCheck(DiscreteArgs),
    /// Monte Carlo Gaussian concentration checks.
    GaussCheck(GaussArgs),
    /// Chaining checks for the canonical Gaussian process on a point cloud.
    Dudley(DudleyArgs),
    /// Least-squares rate experiments.
    Regress(RegressArgs),
    /// Maurey sparsification and ℓ1-hull net construction.
    Maurey(MaureyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cover(_) => "cover",
            Command::Entropy(_) => "entropy",
            Command::DiscreteCheck(_) => "discrete-check",
            Command::GaussCheck(_) => "gauss-check",
            Command::Dudley(_) => "dudley",
            Command::Regress(_) => "regress",
            Command::Maurey(_) => "maurey",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct CoverArgs {
    /// CSV with one point per row.
    #[arg(long, value_name = "PATH", conflicts_with = "matrix")]
    pub points: Option<PathBuf>,
    /// CSV distance matrix.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Scales, comma separated; defaults to halvings of the diameter.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eps: Option<Vec<f64>>,
    /// Number of halvings when --eps is absent.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyArgs {
    /// CSV with one point per row.
    #[arg(long, value_name = "PATH", conflicts_with = "matrix")]
    pub points: Option<PathBuf>,
    /// CSV distance matrix.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Upper integration limit; defaults to the diameter.
    #[arg(long)]
    pub d_max: Option<f64>,
    /// Number of dyadic terms.
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteArgs {
    /// Random instances (overrides --trials).
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub cube_dim: Option<usize>,
    /// Write violating instances as JSON here.
    #[arg(long, value_name = "PATH")]
    pub violations: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct GaussArgs {
    #[arg(long)]
    pub fields: Option<usize>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Herbst CGF parameter.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Tail threshold.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Greedy,
    Exact,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct DudleyArgs {
    /// Point-cloud CSV.
    #[arg(long, value_name = "PATH")]
    pub points: Option<PathBuf>,
    /// Row index of the basepoint.
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Diameter bound D; defaults to the diameter.
    #[arg(long)]
    pub d_max: Option<f64>,
    /// Depth K of the net hierarchy.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    /// Write the dyadic profile CSV here.
    #[arg(long, value_name = "PATH")]
    pub profile_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Linear,
    L1,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RegressArgs {
    #[arg(long, value_enum)]
    pub class: Option<ClassKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// ℓ1 radius.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Cells as `NxD` pairs, e.g. `64x8,128x8`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Write the JSON summary here when the main output is CSV.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct MaureyArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    samples: Option<usize>,
    trials: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    cover: Option<toml::Table>,
    entropy: Option<toml::Table>,
    #[serde(rename = "discrete-check")]
    discrete_check: Option<toml::Table>,
    #[serde(rename = "gauss-check")]
    gauss_check: Option<toml::Table>,
    dudley: Option<toml::Table>,
    regress: Option<toml::Table>,
    maurey: Option<toml::Table>,
}

/// Values set on the command line replace those from the file.
fn overlay<T: Serialize + DeserializeOwned>(flags: &T, file: Option<toml::Table>) -> Result<T, CliError> {
    let base: T = match file {
        Some(t) => t.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?,
        None => return Ok(serde_json::from_value(serde_json::to_value(flags)?)?),
    };
    let mut merged = serde_json::to_value(&base)?;
    if let (serde_json::Value::Object(m), serde_json::Value::Object(f)) = (&mut merged, serde_json::to_value(flags)?) {
        for (k, v) in f {
            if !v.is_null() {
                m.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(merged)?)
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Applies the config file (if any) under the parsed flags.
pub fn resolve(cli: Cli) -> Result<(RunConfig, Command), CliError> {
    let mut file = match &cli.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let g = cli.global;
    let run = RunConfig {
        seed: g.seed.or(file.seed),
        samples: g.samples.or(file.samples),
        trials: g.trials.or(file.trials),
        out: g.out.or(file.out.take()),
        format: g.format.or(file.format).unwrap_or(Format::Csv),
    };
    let command = match cli.command {
        Command::Cover(a) => Command::Cover(overlay(&a, file.cover)?),
        Command::Entropy(a) => Command::Entropy(overlay(&a, file.entropy)?),
        Command::DiscreteCheck(a) => Command::DiscreteCheck(overlay(&a, file.discrete_check)?),
        Command::GaussCheck(a) => Command::GaussCheck(overlay(&a, file.gauss_check)?),
        Command::Dudley(a) => Command::Dudley(overlay(&a, file.dudley)?),
        Command::Regress(a) => Command::Regress(overlay(&a, file.regress)?),
        Command::Maurey(a) => Command::Maurey(overlay(&a, file.maurey)?),
    };
    Ok((run, command))
}

/// Parses `64x8,128x8`.
pub fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (n, d) = cell
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::Config(format!("grid cell `{cell}` is not of the form NxD")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("grid cell `{cell}`: `{s}` is not a count")))
            };
            Ok((parse(n)?, parse(d)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("64x8, 128X8").unwrap(), vec![(64, 8), (128, 8)]);
        assert!(parse_grid("64").is_err());
        assert!(parse_grid("64xq").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: toml::Table = toml::from_str("sigma = 2.0\nbase = 3\n").unwrap();
        let flags = DudleyArgs {
            sigma: Some(0.5),
            ..Default::default()
        };
        let merged = overlay(&flags, Some(file)).unwrap();
        assert_eq!(merged.sigma, Some(0.5));
        assert_eq!(merged.base, Some(3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let file: toml::Table = toml::from_str("sigmaa = 2.0\n").unwrap();
        assert!(overlay(&DudleyArgs::default(), Some(file)).is_err());
        assert!(toml::from_str::<FileConfig>("[bogus]\nx = 1\n").is_err());
    }

    #[test]
    fn renamed_radius_key() {
        let file: toml::Table = toml::from_str("R = 1.5\nclass = \"l1\"\n").unwrap();
        let merged = overlay(&RegressArgs::default(), Some(file)).unwrap();
        assert_eq!(merged.radius, Some(1.5));
        assert_eq!(merged.class, Some(ClassKind::L1));
    }
}
