use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Dense, DenseGrad, Mlp, MlpTrace};
use crate::codebook::{Codebook, Quantized};
use crate::data::{BehaviorClass, NUM_CLASSES, SCENARIO_LEN};
use crate::error::{Error, Result};

/// Layer widths of the autoencoder. The decoder mirrors the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub classes: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            input: SCENARIO_LEN,
            hidden: vec![512, 128],
            latent: 64,
            classes: NUM_CLASSES,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.latent == 0 || self.classes == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!("all layer widths must be positive: {self:?}")));
        }
        Ok(())
    }

    fn encoder_widths(&self) -> Vec<usize> {
        std::iter::once(self.input)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.latent))
            .collect()
    }

    fn decoder_widths(&self) -> Vec<usize> {
        let mut w = self.encoder_widths();
        w.reverse();
        w
    }
}

/// Which latent the classifier reads: the encoder output ẑ (default) or the
/// quantized z_q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierInput {
    #[default]
    Latent,
    Quantized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub classifier: Dense,
}

fn build(widths: &[usize], mut make: impl FnMut(usize, usize) -> Dense) -> Vec<Dense> {
    widths.windows(2).map(|w| make(w[0], w[1])).collect()
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(dims: &ModelDims, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let encoder = build(&dims.encoder_widths(), |i, o| Dense::xavier(i, o, rng));
        let decoder = build(&dims.decoder_widths(), |i, o| Dense::xavier(i, o, rng));
        let classifier = Dense::xavier(dims.latent, dims.classes, rng);
        Ok(Self {
            dims: dims.clone(),
            encoder: Mlp::new("encoder", encoder),
            decoder: Mlp::new("decoder", decoder),
            classifier,
        })
    }

    pub fn zeros(dims: &ModelDims) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims: dims.clone(),
            encoder: Mlp::new("encoder", build(&dims.encoder_widths(), Dense::zeros)),
            decoder: Mlp::new("decoder", build(&dims.decoder_widths(), Dense::zeros)),
            classifier: Dense::zeros(dims.latent, dims.classes),
        })
    }

    pub fn encode_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.encoder.forward(x)?.outputs.pop().expect("non-empty"))
    }

    pub fn decode_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.decoder.forward(z)?.outputs.pop().expect("non-empty"))
    }

    pub fn classify_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.dims.latent {
            return Err(Error::DimensionMismatch {
                expected: self.dims.latent,
                actual: z.ncols(),
            });
        }
        let probs = softmax_rows(&self.classifier.forward(z));
        if probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier".into()));
        }
        Ok(probs)
    }

    pub fn encode(&self, scenario: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, scenario.len()), scenario)
            .map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(self.encode_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Decodes one latent into a flattened `N_MAX × F × T_OBS` grid.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(self.decode_batch(z)?.into_raw_vec_and_offset().0)
    }

    pub fn classify(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(self.classify_batch(z)?.into_raw_vec_and_offset().0)
    }

    fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder
            .layers
            .iter()
            .chain(&self.decoder.layers)
            .chain(std::iter::once(&self.classifier))
    }

    /// Every parameter tensor as a flat slice: encoder layers, decoder
    /// layers, classifier; weights before bias within a layer.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.dense_layers()
            .flat_map(|d| {
                [
                    d.weights.as_slice().expect("standard layout"),
                    d.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .layers
            .iter_mut()
            .chain(self.decoder.layers.iter_mut())
            .chain(std::iter::once(&mut self.classifier))
            .flat_map(|d| {
                [
                    d.weights.as_slice_mut().expect("standard layout"),
                    d.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    /// `(name, shape)` of every tensor in [`param_slices`](Self::param_slices) order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut push = |prefix: &str, layers: &[Dense]| {
            for (i, d) in layers.iter().enumerate() {
                out.push((format!("{prefix}.{i}.weight"), d.weights.shape().to_vec()));
                out.push((format!("{prefix}.{i}.bias"), d.bias.shape().to_vec()));
            }
        };
        push("encoder", &self.encoder.layers);
        push("decoder", &self.decoder.layers);
        push("classifier", std::slice::from_ref(&self.classifier));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Runs encoder, quantizer, decoder and classifier on a batch, keeping
    /// everything the backward pass needs.
    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        codebook: &Codebook,
        classifier_input: ClassifierInput,
    ) -> Result<ForwardPass> {
        let encoder = self.encoder.forward(x)?;
        let quantized = codebook.quantize(encoder.output().view())?;
        let decoder = self.decoder.forward(quantized.vectors.view())?;
        let cls_in = match classifier_input {
            ClassifierInput::Latent => encoder.output().view(),
            ClassifierInput::Quantized => quantized.vectors.view(),
        };
        let probs = self.classify_batch(cls_in)?;
        Ok(ForwardPass {
            encoder,
            quantized,
            decoder,
            probs,
            classifier_input,
        })
    }

    /// Analytic gradients of the batch-mean total loss
    /// `‖x − x̂‖² + ‖sg[ẑ] − z_q‖² + β‖sg[z_q] − ẑ‖² + λ·CE`.
    ///
    /// The decoder consumes z_q but its input gradient is copied onto ẑ
    /// (straight-through). The codebook receives only the VQ term; the
    /// encoder receives reconstruction, commitment and classification terms.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[BehaviorClass],
        pass: &ForwardPass,
        weights: LossWeights,
    ) -> Result<Gradients> {
        let b = x.nrows();
        if labels.len() != b || pass.reconstruction().nrows() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                actual: labels.len(),
            });
        }
        let scale = 1.0 / b as f64;
        let z_hat = pass.z_hat();
        let z_q = &pass.quantized.vectors;

        let g_rec = (pass.reconstruction() - &x) * (2.0 * scale);
        let (decoder, g_zq) = self.decoder.backward(z_q.view(), &pass.decoder, g_rec, true);
        let mut g_zhat = g_zq.expect("input gradient requested");

        g_zhat.scaled_add(2.0 * weights.beta * scale, &(z_hat - z_q));

        let mut d_logits = pass.probs.clone();
        for (mut row, label) in d_logits.rows_mut().into_iter().zip(labels) {
            row[label.index()] -= 1.0;
        }
        d_logits *= weights.lambda * scale;
        let cls_in = match pass.classifier_input {
            ClassifierInput::Latent => z_hat.view(),
            ClassifierInput::Quantized => z_q.view(),
        };
        let classifier = self.classifier.grad(cls_in, d_logits.view());
        g_zhat += &d_logits.dot(&self.classifier.weights.t());

        let (encoder, _) = self.encoder.backward(x, &pass.encoder, g_zhat, false);

        let mut codebook = Array2::zeros((pass.quantized.codebook_size, z_hat.ncols()));
        for (m, &k) in pass.quantized.indices.iter().enumerate() {
            let mut row = codebook.row_mut(k);
            row.scaled_add(2.0 * scale, &(&z_q.row(m) - &z_hat.row(m)));
        }
        Ok(Gradients {
            encoder,
            decoder,
            classifier,
            codebook,
        })
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    encoder: MlpTrace,
    pub quantized: Quantized,
    decoder: MlpTrace,
    pub probs: Array2<f64>,
    pub classifier_input: ClassifierInput,
}

impl ForwardPass {
    pub fn z_hat(&self) -> &Array2<f64> {
        self.encoder.output()
    }

    pub fn reconstruction(&self) -> &Array2<f64> {
        self.decoder.output()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<DenseGrad>,
    pub decoder: Vec<DenseGrad>,
    pub classifier: DenseGrad,
    /// `Q × R_q` gradient of the codebook entries.
    pub codebook: Array2<f64>,
}

impl Gradients {
    /// Flat slices in [`ModelParams::param_slices`] order (codebook excluded).
    pub fn model_slices(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain(std::iter::once(&self.classifier))
            .flat_map(|g| {
                [
                    g.weights.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}
