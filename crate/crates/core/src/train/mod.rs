//! Training loop.
//!
//! Per batch: forward → losses → backward → Adam step (model and codebook)
//! → codebook maintenance (usage EMA, decay, anchors, reinit) using the
//! batch's encoder outputs from the forward pass.

pub mod adam;
pub mod config;
pub mod loss;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::data::{BehaviorClass, Dataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nn::{LossWeights, ModelParams};
use crate::rng;

pub use adam::Adam;
pub use config::{EarlyStop, TrainConfig};
pub use loss::{loss_cl, loss_cvq, loss_total, ClassificationLoss, CvqLoss};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub reconstruction: f64,
    pub vq: f64,
    pub commitment: f64,
    pub classification: f64,
    pub total: f64,
    /// Distinct entries selected during the epoch.
    pub active_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub epochs: Vec<EpochLog>,
    pub final_usage: usize,
    pub codebook_size: usize,
    pub clamped_probabilities: usize,
    pub stopped_early: bool,
    /// Excluded from serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn first(&self) -> Option<&EpochLog> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,reconstruction,vq,commitment,classification,total,active_entries\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{}\n",
                e.epoch, e.reconstruction, e.vq, e.commitment, e.classification, e.total, e.active_entries
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub codebook: Codebook,
    pub report: TrainReport,
}

/// Stacks scenario values into a `len × 2700` matrix.
pub fn design_matrix(dataset: &Dataset) -> Array2<f64> {
    let cols = dataset.scenarios.first().map_or(0, |s| s.values().len());
    let mut flat = Vec::with_capacity(dataset.len() * cols);
    for s in &dataset.scenarios {
        flat.extend_from_slice(s.values());
    }
    Array2::from_shape_vec((dataset.len(), cols), flat).expect("uniform scenario length")
}

/// Initial parameters and codebook for `config`, from the seeded streams.
pub fn initialize(config: &TrainConfig, input_dim: usize) -> Result<(ModelParams, Codebook)> {
    let dims = config.model_dims(input_dim, NUM_CLASSES);
    let params = ModelParams::init(&dims, &mut rng::seeded(config.seed, rng::stream::MODEL_INIT))?;
    let codebook = Codebook::random(
        config.codebook_size,
        config.latent_dim,
        config.gamma,
        config.epsilon,
        config.reinit_enabled,
        &mut rng::seeded(config.seed, rng::stream::CODEBOOK_INIT),
    )?;
    Ok((params, codebook))
}

/// Nearest-entry assignment of every scenario, encoded in chunks.
pub fn assign_all(params: &ModelParams, codebook: &Codebook, data: &Array2<f64>) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.nrows());
    for chunk in data.axis_chunks_iter(Axis(0), 256) {
        let z = params.encode_batch(chunk)?;
        out.extend(codebook.quantize(z.view())?.indices);
    }
    Ok(out)
}

/// Trains on an already-normalized dataset.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(dataset, config, |_| {})
}

pub fn train_with_observer(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    if config.batch_size > dataset.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            dataset.len()
        )));
    }
    if config.h * config.w != 1 {
        return Err(Error::Config("vector latents require h = w = 1".into()));
    }
    let started = Instant::now();
    let data = design_matrix(dataset);
    let labels: Vec<BehaviorClass> = dataset.labels();
    let (mut params, mut codebook) = initialize(config, data.ncols())?;
    let mut adam = Adam::new(config.learning_rate);
    let mut order_rng = rng::seeded(config.seed, rng::stream::BATCH_ORDER);
    let weights = LossWeights {
        beta: config.beta,
        lambda: config.lambda,
    };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut clamped_total = 0;
    let mut best_rec = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut sums = [0.0f64; 5];
        let mut active = vec![false; codebook.len()];
        for (batch_no, idx) in order.chunks(config.batch_size).enumerate() {
            let diverged = |detail: String| Error::Diverged {
                epoch,
                batch: batch_no,
                detail,
            };
            let x = data.select(Axis(0), idx);
            let batch_labels: Vec<BehaviorClass> = idx.iter().map(|&i| labels[i]).collect();
            let pass = params
                .forward(x.view(), &codebook, config.classifier_input)
                .map_err(|e| diverged(e.to_string()))?;

            let cvq = loss_cvq(
                x.view(),
                pass.reconstruction().view(),
                pass.z_hat().view(),
                pass.quantized.vectors.view(),
                config.beta,
            );
            let cl = loss_cl(&batch_labels, &pass.probs);
            clamped_total += cl.clamped;
            let total = loss_total(cvq.total(), cl.value, config.lambda);
            if !total.is_finite() {
                return Err(diverged(format!("non-finite loss {cvq:?}, classification {}", cl.value)));
            }
            let b = idx.len() as f64;
            for (s, v) in sums.iter_mut().zip([cvq.reconstruction, cvq.vq, cvq.commitment, cl.value, total]) {
                *s += v * b;
            }
            for &q in &pass.quantized.indices {
                active[q] = true;
            }

            let grads = params.backward(x.view(), &batch_labels, &pass, weights)?;
            {
                let mut tensors = params.param_slices_mut();
                tensors.push(codebook.entries_mut());
                let mut grad_slices = grads.model_slices();
                grad_slices.push(grads.codebook.as_slice().expect("standard layout"));
                adam.step(&mut tensors, &grad_slices);
            }
            codebook
                .maintain(pass.z_hat().view(), &pass.quantized.counts, config.h, config.w)
                .map_err(|e| diverged(e.to_string()))?;
        }
        let n = dataset.len() as f64;
        let log = EpochLog {
            epoch,
            reconstruction: sums[0] / n,
            vq: sums[1] / n,
            commitment: sums[2] / n,
            classification: sums[3] / n,
            total: sums[4] / n,
            active_entries: active.iter().filter(|&&a| a).count(),
        };
        observer(&log);
        epochs.push(log);

        if let Some(es) = config.early_stop {
            if log.reconstruction < best_rec - es.min_delta {
                best_rec = log.reconstruction;
                stale = 0;
            } else {
                stale += 1;
                if stale >= es.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    if !params.is_finite() {
        return Err(Error::NonFinite("trained parameters".into()));
    }
    let assignments = assign_all(&params, &codebook, &data)?;
    let mut used = vec![false; codebook.len()];
    for q in assignments {
        used[q] = true;
    }
    let report = TrainReport {
        config_hash: config.hash(),
        epochs,
        final_usage: used.iter().filter(|&&u| u).count(),
        codebook_size: codebook.len(),
        clamped_probabilities: clamped_total,
        stopped_early,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        params,
        codebook,
        report,
    })
}
