//! Run parameters from flags and an optional TOML file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use zonalchaos::linalg::parse_matrix;
use zonalchaos::Partition;

use crate::CliError;

/// Environment variable naming the zonal table cache directory.
pub const CACHE_ENV: &str = "ZONALCHAOS_CACHE_DIR";

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Every parameter any subcommand reads. Unused ones are ignored by the
/// subcommand but still recorded in the output metadata.
#[derive(Clone, Debug, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// TOML file with default values for any of the flags below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Number of rows l of the Gaussian matrix (or intrinsic-volume index)
    #[arg(long)]
    pub l: Option<usize>,
    /// Number of columns n; for `arw`, the squared frequency radius
    #[arg(long)]
    pub n: Option<u64>,
    /// Partition, comma-separated and non-increasing; "0" is the empty partition
    #[arg(long)]
    pub kappa: Option<String>,
    /// Second partition for covariance commands
    #[arg(long)]
    pub kappa2: Option<String>,
    /// Largest weight listed when no partition is given
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Eigenvalues, comma-separated
    #[arg(long)]
    pub eigs: Option<String>,
    /// Matrix argument, rows separated by ';' ("1,0,2;0,1,1")
    #[arg(long)]
    pub x: Option<String>,
    /// Covariance matrix, inline or a path to a file with one row per line
    #[arg(long)]
    pub sigma: Option<String>,
    /// Laguerre order
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Mehler time
    #[arg(long)]
    pub t: Option<f64>,
    /// Diagonal of the Mehler matrix A, comma-separated
    #[arg(long)]
    pub a: Option<String>,
    /// Scalar correlation R = rho Id
    #[arg(long)]
    pub rho: Option<f64>,
    /// Correlation matrix R
    #[arg(long)]
    pub r: Option<String>,
    /// Functional for Monte Carlo coefficients: sqrt-det, trace or log-det
    #[arg(long)]
    pub func: Option<String>,
    /// Geometry route: kubota, stiefel, determinant or all
    #[arg(long)]
    pub route: Option<String>,
    /// Parallel-body radius for the Steiner check
    #[arg(long)]
    pub eps: Option<f64>,
    /// Monte Carlo sample count
    #[arg(long)]
    pub samples: Option<usize>,
    /// Independent field copies for `arw`
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Grid points per axis for `arw`
    #[arg(long)]
    pub grid: Option<usize>,
    /// Master RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zonal table degree
    #[arg(long)]
    pub max_degree: Option<usize>,
    /// Acceptance criterion to run (all by default)
    #[arg(long)]
    pub id: Option<usize>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Zonal table cache; falls back to ZONALCHAOS_CACHE_DIR
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn to_map(p: &Params) -> Map<String, Value> {
    match serde_json::to_value(p).expect("params serialize") {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => unreachable!(),
    }
}

/// Reads a TOML file of parameters; unknown keys are errors.
pub fn load_config(path: &Path) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}

/// Flag values override file values.
pub fn resolve(flags: Params) -> Result<Params, CliError> {
    let Some(path) = flags.config.clone() else {
        return Ok(flags);
    };
    let file = load_config(&path)?;
    let mut merged = to_map(&file);
    merged.extend(to_map(&flags));
    let mut out: Params = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Validation(format!("config: {e}")))?;
    out.config = Some(path);
    Ok(out)
}

fn missing(name: &str) -> CliError {
    CliError::Validation(format!("missing required parameter --{name}"))
}

fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("--{name}: {t:?} is not a number")))
        })
        .collect()
}

fn read_matrix(name: &str, s: &str) -> Result<DMatrix<f64>, CliError> {
    let path = Path::new(s);
    let text = if !s.contains(',') && path.is_file() {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("--{name}: cannot read {s}: {e}")))?;
        body.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(";")
    } else {
        s.to_string()
    };
    parse_matrix(&text).map_err(|e| CliError::Validation(format!("--{name}: {e}")))
}

impl Params {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Text)
    }

    pub fn ell(&self) -> Result<usize, CliError> {
        self.l.ok_or_else(|| missing("l"))
    }

    pub fn n_usize(&self) -> Result<usize, CliError> {
        self.n.map(|n| n as usize).ok_or_else(|| missing("n"))
    }

    pub fn n_u64(&self) -> Result<u64, CliError> {
        self.n.ok_or_else(|| missing("n"))
    }

    pub fn kappa(&self) -> Result<Partition, CliError> {
        let s = self.kappa.as_deref().ok_or_else(|| missing("kappa"))?;
        s.parse().map_err(|e| CliError::Validation(format!("--kappa: {e}")))
    }

    pub fn kappa_opt(&self) -> Result<Option<Partition>, CliError> {
        self.kappa.as_ref().map(|_| self.kappa()).transpose()
    }

    pub fn kappa2(&self) -> Result<Partition, CliError> {
        match &self.kappa2 {
            Some(s) => s.parse().map_err(|e| CliError::Validation(format!("--kappa2: {e}"))),
            None => self.kappa(),
        }
    }

    pub fn eigs(&self) -> Result<Vec<f64>, CliError> {
        parse_list("eigs", self.eigs.as_deref().ok_or_else(|| missing("eigs"))?)
    }

    pub fn diag_a(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match &self.a {
            Some(s) => parse_list("a", s),
            None => Ok(vec![1.0; n]),
        }
    }

    pub fn x(&self) -> Result<DMatrix<f64>, CliError> {
        read_matrix("x", self.x.as_deref().ok_or_else(|| missing("x"))?)
    }

    pub fn sigma(&self) -> Result<DMatrix<f64>, CliError> {
        read_matrix("sigma", self.sigma.as_deref().ok_or_else(|| missing("sigma"))?)
    }

    pub fn sigma_opt(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.sigma.as_ref().map(|_| self.sigma()).transpose()
    }

    pub fn r(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.r.as_deref().map(|s| read_matrix("r", s)).transpose()
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir.clone().or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
    }

    /// Resolved parameters as recorded in output metadata.
    pub fn resolved(&self) -> Value {
        let mut m = to_map(self);
        m.insert("seed".into(), Value::from(self.seed()));
        if let Some(c) = &self.config {
            m.insert("config".into(), Value::from(c.display().to_string()));
        }
        Value::Object(m)
    }
}
