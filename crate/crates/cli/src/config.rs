//! JSON run configuration. Every field is optional; flags win over the file.
//!
//! ```json
//! {
//!   "pop": "fixtures/pop24.csv",
//!   "n": 4,
//!   "k1": "unity", "k2": 1, "k3": "C_x", "alpha": 1.0,
//!   "mode": "enumerate",
//!   "estimators": ["mean", "ratio", "t1", "t2", "tp"],
//!   "format": "json",
//!   "grid": { "k1_atoms": ["N"], "k3_atoms": ["S_x", "f"], "k2_values": [1, -1] }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surveykit::estimators::{KValue, Sign};
use surveykit::population::SyntheticSpec;

use crate::args::{Family, Format, Mode};
use crate::CliError;

/// A `K` constant as written in JSON: a number or an atom name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Number(f64),
    Name(String),
}

impl KSpec {
    pub fn to_kvalue(&self) -> Result<KValue, CliError> {
        match self {
            KSpec::Number(v) => Ok(KValue::Literal(*v)),
            KSpec::Name(s) => s.parse().map_err(CliError::Usage),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub k1_atoms: Vec<String>,
    #[serde(default)]
    pub k3_atoms: Vec<String>,
    #[serde(default)]
    pub k4_atoms: Vec<String>,
    #[serde(default)]
    pub k5_atoms: Vec<String>,
    #[serde(default)]
    pub k2_values: Vec<Sign>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub pop: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub n: Option<usize>,
    pub n_prime: Option<usize>,
    pub k1: Option<KSpec>,
    pub k2: Option<Sign>,
    pub k3: Option<KSpec>,
    pub k4: Option<KSpec>,
    pub k5: Option<KSpec>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub m: Option<f64>,
    pub q: Option<f64>,
    pub gamma: Option<f64>,
    pub mode: Option<Mode>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub tol_bias: Option<f64>,
    pub tol_mse: Option<f64>,
    pub estimators: Option<Vec<String>>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub family: Option<Family>,
    pub grid: Option<GridConfig>,
}

impl FileConfig {
    /// Reads a config file; a relative `pop` path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        if let (Some(pop), Some(dir)) = (&cfg.pop, path.parent()) {
            if pop.is_relative() {
                cfg.pop = Some(dir.join(pop));
            }
        }
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self, CliError> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}
