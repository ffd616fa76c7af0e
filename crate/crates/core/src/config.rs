//! JSON configuration shared by the command-line tools.
//!
//! Every section is optional and falls back to its defaults; unknown keys
//! are rejected. `spectral` and `mel` apply to every command, including the
//! benchmark, so they are set once at the top level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::QuadratureSpec;
use crate::error::{Error, Result};
use crate::fusion::TrainConfig;
use crate::spectral::{MelConfig, SpectralConfig};
use crate::synthbench::BenchConfig;

/// Settings for the information-curve and bound commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub quadrature: QuadratureSpec,
    /// Source count used for the default reference information.
    pub n_sources: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            quadrature: QuadratureSpec::default(),
            n_sources: 2,
        }
    }
}

/// Settings for the segment-MSE parity calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParityConfig {
    /// Benchmark instances used for the calibration.
    pub instances: usize,
    /// Wasserstein-1 threshold as a fraction of the mean deterministic MSE.
    pub tolerance: f64,
}

impl Default for ParityConfig {
    fn default() -> Self {
        ParityConfig {
            instances: 10,
            tolerance: 0.5,
        }
    }
}

/// Training-set settings for `bench --train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSetConfig {
    pub instances: usize,
    /// Seed of the first training instance; keep it far from the
    /// benchmark's `seed + index` range.
    pub seed: u64,
}

impl Default for TrainSetConfig {
    fn default() -> Self {
        TrainSetConfig {
            instances: 40,
            seed: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub spectral: SpectralConfig,
    pub mel: MelConfig,
    pub train: TrainConfig,
    pub train_set: TrainSetConfig,
    pub bench: BenchConfig,
    pub bounds: BoundsConfig,
    pub parity: ParityConfig,
}

impl CliConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: CliConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        let bench_default = BenchConfig::default();
        if cfg.bench.spectral != bench_default.spectral || cfg.bench.mel != bench_default.mel {
            return Err(Error::InvalidConfig(
                "set spectral and mel at the top level, not inside bench".into(),
            ));
        }
        cfg.bench.spectral = cfg.spectral.clone();
        cfg.bench.mel = cfg.mel.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        self.train.validate()?;
        self.bench.validate()?;
        if self.bounds.n_sources < 2 {
            return Err(Error::InvalidConfig("bounds.n_sources must be at least 2".into()));
        }
        if self.parity.instances == 0 || !(self.parity.tolerance > 0.0) {
            return Err(Error::InvalidConfig("parity needs instances and a positive tolerance".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
