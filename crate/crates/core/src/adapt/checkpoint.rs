use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{TrainConfig, TrainMode, TrainedModel};
use crate::error::{Error, Result};
use crate::model::{ModelDims, ModelParams};
use crate::textproc::{Vocabulary, WindowConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a classifier: weights in their stored form
/// (dense or NF4 codes + scales), adapters, vocabulary and the training
/// configuration with its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub mode: TrainMode,
    pub dims: ModelDims,
    pub windows: WindowConfig,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub state: TrainedModel,
}

impl Checkpoint {
    pub fn new(state: TrainedModel, vocab: Vocabulary, config: TrainConfig) -> Result<Self> {
        let ckpt = Self {
            format_version: CHECKPOINT_VERSION,
            seed: config.seed,
            mode: state.mode,
            dims: state.dims(),
            windows: config.windows,
            config,
            vocab,
            state,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        if self.state.dims() != self.dims {
            return Err(Error::Checkpoint(format!(
                "declared dims {:?} differ from stored weights {:?}",
                self.dims,
                self.state.dims()
            )));
        }
        if self.vocab.size() != self.dims.vocab {
            return Err(Error::Checkpoint(format!(
                "vocabulary mismatch: {} entries for an embedding table of {} rows",
                self.vocab.size(),
                self.dims.vocab
            )));
        }
        self.state
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid weights: {e}")))
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.state.params()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        // read the version first so a future format fails with a clear message
        let raw: serde_json::Value = serde_json::from_str(json)?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported format version {v} (expected {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let ckpt: Checkpoint = serde_json::from_value(raw)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&json)
    }
}
