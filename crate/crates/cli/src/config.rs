//! Command arguments, their JSON config form, and flag/file merging.
//!
//! Every argument struct doubles as the config-file schema: flags are
//! serialized, laid over the file's JSON, and the result deserialized again.
//! Once defaults are filled in, the same struct is echoed so a run can be
//! repeated with `--config`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "NHPP_SEED";

/// A number, or a named value such as `shrinkage` or `improper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Number(f64),
    Name(String),
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty value".into());
        }
        Ok(s.parse().map(Param::Number).unwrap_or_else(|_| Param::Name(s.to_string())))
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Number(v) => write!(f, "{v}"),
            Param::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// `sine2`, `const:C`, `vm:KAPPA:U@M,…` or `gauss:SIGMA:U@M,…`
    #[arg(long)]
    pub intensity: Option<String>,
    /// Observation length `s`.
    #[arg(long)]
    pub exposure: Option<f64>,
    /// `circle` or `a,b`
    #[arg(long)]
    pub window: Option<String>,
    /// `inversion` or `thinning`
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pattern CSV; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Window, kernel, prior family and chain settings shared by `estimate` and `predict`.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    #[arg(long)]
    pub window: Option<String>,
    /// Von Mises concentration (circle; default 5).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Gaussian bandwidth (interval windows).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Density of the uniform base measure `α`.
    #[arg(long)]
    pub base_density: Option<f64>,
    /// `improper` or a positive number.
    #[arg(long)]
    pub beta: Option<Param>,
    /// Comma-separated exponents; `shrinkage` means `|α| − 1`.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<Param>>,
    /// Observation length of the pattern.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub aux_components: Option<usize>,
    #[arg(long)]
    pub location_step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// Pattern CSV with header `location`.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub model: ModelArgs,
    /// Named intensity drawn as the reference curve.
    #[arg(long)]
    pub truth: Option<String>,
    /// Estimates CSV; stdout when no output is given.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictArgs {
    /// Observed pattern CSV.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Future pattern CSVs to score.
    #[arg(long, value_delimiter = ',')]
    pub future: Option<Vec<PathBuf>>,
    #[command(flatten)]
    #[serde(default)]
    pub model: ModelArgs,
    /// Length of the future interval.
    #[arg(long)]
    pub t: Option<f64>,
    /// Importance replicates per point-layer evaluation.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Score CSV; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskArgs {
    /// Gate to run: `lemma1`, `lemma3`, `theorem3` or `theorem4`.
    #[arg(long)]
    pub check: Option<String>,
    /// Table to produce: `estimation` or `predictive`.
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub abs_alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<Param>>,
    /// True weights for the exact domination table.
    #[arg(long, value_delimiter = ',')]
    pub w_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Args {
    /// Directory receiving the pattern, estimates and SVG.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Lays the non-null flag values over the config file and re-reads the result.
pub fn merge<T: Serialize + DeserializeOwned>(file: Option<&Path>, flags: &T) -> Result<T, CliError> {
    let mut base = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !base.is_object() {
        return Err(CliError::Config("config file must hold a JSON object".into()));
    }
    let flags = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?;
    overlay(&mut base, flags);
    serde_json::from_value(base).map_err(|e| CliError::Config(format!("config: {e}")))
}

fn overlay(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (key, v) in s {
                if v.is_null() {
                    continue;
                }
                match d.get_mut(&key) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        d.insert(key, v);
                    }
                }
            }
        }
        (d, s) => {
            if !s.is_null() {
                *d = s;
            }
        }
    }
}

/// Flag or config value, then `NHPP_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_seed(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// The resolved config as one compact JSON line.
pub fn echo<T: Serialize>(resolved: &T) -> String {
    serde_json::to_string(resolved).expect("argument structs serialize")
}
