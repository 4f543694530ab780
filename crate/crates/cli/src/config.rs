//! Run configuration: a TOML file whose keys mirror [`RunConfig`], with
//! command-line flags applied on top.
//!
//! ```toml
//! seed = 0
//! output_dir = "out"
//!
//! [dataset]
//! root = "data"
//! images = "images"
//! masks = "masks"
//!
//! [rbd]
//! k_regions = 200
//!
//! [model]
//! widths = [8, 16, 16, 16]
//!
//! [train]
//! max_iter = 1000
//!
//! [synth]
//! count = 200
//! ```
//!
//! Precedence: built-in defaults < config file < flags. The top-level
//! `seed` drives model initialization, the training permutation and data
//! synthesis; it overrides `train.seed`.

use std::path::{Path, PathBuf};

use edgesal_core::net::{ModelConfig, TrainConfig};
use edgesal_core::rbd::RbdParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub root: PathBuf,
    /// Image subdirectory under `root`.
    pub images: String,
    /// Ground-truth mask subdirectory under `root`; masks pair with images
    /// by identical file stem.
    pub masks: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("data"),
            images: "images".into(),
            masks: "masks".into(),
        }
    }
}

impl DatasetConfig {
    pub fn images_dir(&self) -> PathBuf {
        self.root.join(&self.images)
    }

    pub fn masks_dir(&self) -> PathBuf {
        self.root.join(&self.masks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of generated image/mask pairs. Images are
    /// `train.image_size` pixels square.
    pub count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { count: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub rbd: RbdParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            dataset: DatasetConfig::default(),
            rbd: RbdParams::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// The parameters that change computed results; paths are excluded so the
/// hash is stable across machines and directory layouts.
#[derive(Serialize)]
struct Computational<'a> {
    seed: u64,
    rbd: &'a RbdParams,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    synth: &'a SynthConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> CliResult<()> {
        self.rbd.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.train.image_size == 0 || self.train.image_size % 4 != 0 {
            return Err(CliError::Usage(format!(
                "train.image_size must be a positive multiple of 4, got {}",
                self.train.image_size
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Hex SHA-256 of the computational parameters.
    pub fn hash(&self) -> String {
        let c = Computational {
            seed: self.seed,
            rbd: &self.rbd,
            model: &self.model,
            train: &self.train,
            synth: &self.synth,
        };
        let bytes = serde_json::to_vec(&c).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            tool: "edgesal".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: self.hash(),
            seed: self.seed,
        }
    }
}

/// Header recorded with every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("provenance serializes") + "\n"
    }
}
