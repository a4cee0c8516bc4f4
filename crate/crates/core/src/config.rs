//! Run configuration shared by the library, CLI and benchmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervision::CostWeights;

/// Default number of polar rays.
pub const DEFAULT_RAYS: usize = 32;
/// Default number of sampling points per ray in the fan grid.
pub const DEFAULT_SAMPLE_POINTS: usize = 4;
/// Default rasterized-mask resolution (cells per side).
pub const DEFAULT_RMASK_RESOLUTION: usize = 32;
/// Default lattice resolution for approximability search.
pub const DEFAULT_GRID_N: usize = 64;
/// Default decoder depth for layered predictions.
pub const DEFAULT_DECODER_LAYERS: usize = 6;

/// Hyperparameters for a run. All fields have defaults; a config file or CLI
/// flags may override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of polar rays K.
    pub k: usize,
    /// Sampling points per ray T.
    pub t: usize,
    /// Rasterized-mask resolution (square).
    pub rmask_resolution: usize,
    /// Cost/loss coefficients.
    pub weights: CostWeights,
    /// Lattice resolution for approximability search.
    pub grid_n: usize,
    /// Seed for synthetic shape generators.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_RAYS,
            t: DEFAULT_SAMPLE_POINTS,
            rmask_resolution: DEFAULT_RMASK_RESOLUTION,
            weights: CostWeights::default(),
            grid_n: DEFAULT_GRID_N,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parse a TOML config. Missing keys fall back to defaults, so an empty
    /// document yields `RunConfig::default()`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::parameter(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::parameter(format!("k must be >= 3, got {}", self.k)));
        }
        if self.t < 1 {
            return Err(Error::parameter("t must be >= 1"));
        }
        if self.rmask_resolution < 2 {
            return Err(Error::parameter(format!(
                "rmask_resolution must be >= 2, got {}",
                self.rmask_resolution
            )));
        }
        if self.grid_n < 4 {
            return Err(Error::parameter(format!(
                "grid_n must be >= 4, got {}",
                self.grid_n
            )));
        }
        self.weights.validate()?;
        Ok(())
    }
}
