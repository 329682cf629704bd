//! JSON run configuration. Every field is optional; command-line flags
//! override the file.
//!
//! ```json
//! {
//!   "inputs": {
//!     "c": {"kind": "truncated_gaussian", "mu": 0.5, "sigma": 0.05, "lo": 0, "hi": 1},
//!     "a": {"kind": "uniform", "lo": 1.1, "hi": 2.0},
//!     "b": {"kind": "beta", "alpha": 2, "beta": 3}
//!   },
//!   "quadrature": {"rel_tol": 1e-6, "abs_tol": 1e-9},
//!   "grid": {"points": 256},
//!   "seed": 24301,
//!   "out_dir": "out",
//!   "periods": [1, 2, 3, 5, 10, 15]
//! }
//! ```
//!
//! `params` (the six Gaussian hyperparameters) may replace `inputs`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pielou_core::{FitOptions, JointInputs, ModelParams, QuadratureConfig};

use crate::error::{CliError, CliResult};

pub const DEFAULT_POINTS: usize = 256;
pub const DEFAULT_SEED: u64 = 24301;
pub const DEFAULT_COUNT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: DEFAULT_POINTS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<JointInputs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    pub quadrature: QuadratureConfig,
    pub grid: GridConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Raw data units per model unit (fit only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// Monte Carlo sample count (simulate only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub fit: FitOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates; errors name the offending field by its path.
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." { "<root>".to_owned() } else { field };
            CliError::config(field, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.inputs.is_some() && self.params.is_some() {
            return Err(CliError::config("params", "give either `inputs` or `params`, not both"));
        }
        if let Some(p) = &self.params {
            p.validate().map_err(|e| CliError::config("params", e))?;
        }
        self.quadrature.validate().map_err(|e| CliError::config("quadrature", e))?;
        self.fit.quadrature.validate().map_err(|e| CliError::config("fit.quadrature", e))?;
        if self.grid.points < 2 {
            return Err(CliError::config("grid.points", format!("need at least 2 points, got {}", self.grid.points)));
        }
        if let Some(s) = self.unit_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::config("unit_scale", format!("must be positive, got {s}")));
            }
        }
        for (i, &x) in self.x_hat.iter().flatten().enumerate() {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::config(format!("x_hat[{i}]"), format!("must be positive, got {x}")));
            }
        }
        for (i, &a) in self.alpha.iter().flatten().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::config(format!("alpha[{i}]"), format!("must lie in (0, 1), got {a}")));
            }
        }
        if self.count == Some(0) {
            return Err(CliError::config("count", "must be at least 1"));
        }
        Ok(())
    }

    /// The input law, from `inputs` or from the Gaussian `params`.
    pub fn joint_inputs(&self) -> CliResult<JointInputs> {
        match (&self.inputs, &self.params) {
            (Some(j), _) => Ok(*j),
            (None, Some(p)) => p.inputs().map_err(|e| CliError::config("params", e)),
            (None, None) => Err(CliError::config("inputs", "missing (or give `params`)")),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.clone().unwrap_or_else(|| vec![0.25, 0.01])
    }
}
