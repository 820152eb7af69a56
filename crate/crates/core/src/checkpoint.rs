//! Model checkpoint: a [`container`](crate::container) with magic `SCNCKPT1`.
//!
//! The header carries the training config and its hash, layer widths, the
//! name and shape of every tensor, normalization statistics and the codebook
//! hyperparameters with EMA usage. The payload is every model tensor in
//! header order followed by the `Q × R_q` codebook entries, all row-major.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::container;
use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::nn::{ModelDims, ModelParams};
use crate::train::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SCNCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub normalization: Normalization,
    pub params: ModelParams,
    pub codebook: Codebook,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodebookHeader {
    size: usize,
    dim: usize,
    gamma: f64,
    epsilon: f64,
    reinit_enabled: bool,
    ema_usage: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: TrainConfig,
    config_hash: String,
    dims: ModelDims,
    tensors: Vec<(String, Vec<usize>)>,
    normalization: Normalization,
    codebook: CodebookHeader,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: "scenario-checkpoint".into(),
            version: 1,
            config: self.config.clone(),
            config_hash: self.config.hash(),
            dims: self.params.dims.clone(),
            tensors: self.params.tensor_shapes(),
            normalization: self.normalization,
            codebook: CodebookHeader {
                size: self.codebook.len(),
                dim: self.codebook.dim(),
                gamma: self.codebook.gamma(),
                epsilon: self.codebook.epsilon(),
                reinit_enabled: self.codebook.reinit_enabled(),
                ema_usage: self.codebook.ema_usage().to_vec(),
            },
        };
        let mut values = Vec::with_capacity(self.params.parameter_count() + self.codebook.entries().len());
        for s in self.params.param_slices() {
            values.extend_from_slice(s);
        }
        values.extend(self.codebook.entries().iter());
        container::encode(CHECKPOINT_MAGIC, &header, &values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values): (Header, Vec<f64>) = container::decode(CHECKPOINT_MAGIC, bytes)?;
        let bad = |detail: String| Error::Format {
            what: "checkpoint",
            detail,
        };
        if header.config_hash != header.config.hash() {
            return Err(bad("config hash does not match stored config".into()));
        }
        let mut params = ModelParams::zeros(&header.dims)?;
        if params.tensor_shapes() != header.tensors {
            return Err(bad("tensor layout does not match layer widths".into()));
        }
        let model_len = params.parameter_count();
        let cb = &header.codebook;
        if values.len() != model_len + cb.size * cb.dim {
            return Err(bad(format!(
                "expected {} values, found {}",
                model_len + cb.size * cb.dim,
                values.len()
            )));
        }
        let mut offset = 0;
        for slice in params.param_slices_mut() {
            slice.copy_from_slice(&values[offset..offset + slice.len()]);
            offset += slice.len();
        }
        let entries = Array2::from_shape_vec((cb.size, cb.dim), values[offset..].to_vec())
            .map_err(|e| bad(e.to_string()))?;
        let mut codebook = Codebook::new(entries, cb.gamma, cb.epsilon, cb.reinit_enabled)?;
        codebook.restore_usage(cb.ema_usage.clone())?;
        Ok(Self {
            config: header.config,
            normalization: header.normalization,
            params,
            codebook,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::initialize;

    #[test]
    fn round_trip() {
        let config = TrainConfig {
            codebook_size: 5,
            latent_dim: 3,
            hidden: vec![4],
            ..Default::default()
        };
        let (params, mut codebook) = initialize(&config, 7).unwrap();
        codebook.restore_usage(vec![0.1, 0.0, 0.2, 0.3, 0.0]).unwrap();
        let ck = Checkpoint {
            config,
            normalization: Normalization::identity(),
            params,
            codebook,
        };
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back, ck);
    }
}
