use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::EncoderConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Everything a cross-validation run depends on besides the log, the net and
/// the seed. Every field has a default, so an empty file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub folds: usize,
    pub encoder: EncoderConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            folds: 5,
            encoder: EncoderConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    /// SHA-256 of the JSON form, seed included.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Invalid(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.encoder.time_buckets < 2 {
            return Err(Error::Invalid("need at least 2 time buckets".into()));
        }
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_field() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.train.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: Config = serde_json::from_str(r#"{"train": {"max_epochs": 3}}"#).unwrap();
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.model.grnn_hidden, vec![256, 256]);
    }
}
