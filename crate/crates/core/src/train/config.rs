use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codebook::{DEFAULT_EPSILON, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::nn::{ClassifierInput, ModelDims};

/// Stop once the epoch reconstruction loss has not improved by `min_delta`
/// for `patience` consecutive epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight of the classification loss.
    pub lambda: f64,
    /// Weight of the commitment loss.
    pub beta: f64,
    /// Number of codebook entries Q.
    pub codebook_size: usize,
    /// Latent / codebook entry dimension R_q.
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub reinit_enabled: bool,
    pub classifier_input: ClassifierInput,
    /// Spatial extent of one encoded feature map; 1 × 1 for vector latents.
    pub h: usize,
    pub w: usize,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 1500,
            learning_rate: 0.001,
            lambda: 0.2,
            beta: 0.25,
            codebook_size: 64,
            latent_dim: 64,
            hidden: vec![512, 128],
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            reinit_enabled: true,
            classifier_input: ClassifierInput::Latent,
            h: 1,
            w: 1,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("codebook_size", self.codebook_size),
            ("latent_dim", self.latent_dim),
            ("h", self.h),
            ("w", self.w),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("lambda and beta must be non-negative".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn model_dims(&self, input: usize, classes: usize) -> ModelDims {
        ModelDims {
            input,
            hidden: self.hidden.clone(),
            latent: self.latent_dim,
            classes,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = TrainConfig::default();
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.epochs, 1500);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.lambda, 0.2);
        assert_eq!(c.beta, 0.25);
        assert_eq!(c.latent_dim, 64);
        assert_eq!(c.classifier_input, ClassifierInput::Latent);
        c.validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c = TrainConfig::from_toml("codebook_size = 128\nreinit_enabled = false\n").unwrap();
        assert_eq!(c.codebook_size, 128);
        assert!(!c.reinit_enabled);
        assert_eq!(c.batch_size, 64);
        assert!(TrainConfig::from_toml("codebok_size = 3").is_err());
        assert!(TrainConfig::from_toml("codebook_size = 0").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
