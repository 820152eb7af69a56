#![allow(dead_code)]

use catalog_core::nn::{ClassifierInput, LossWeights, ModelDims, ModelParams};
use catalog_core::{BehaviorClass, Codebook};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
/// Denominator floor for the relative error, so that coordinates whose
/// true gradient is exactly zero compare on an absolute scale.
pub const REL_FLOOR: f64 = 1e-7;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Plain-loop forward of a tanh MLP with a linear last layer.
fn mlp(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (l, (w, b)) in layers.iter().enumerate() {
        let mut y = b.clone();
        for (i, hi) in h.iter().enumerate() {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += hi * w[i][j];
            }
        }
        if l + 1 < layers.len() {
            y.iter_mut().for_each(|v| *v = v.tanh());
        }
        h = y;
    }
    h
}

fn layers(mlp: &catalog_core::nn::Mlp) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    mlp.layers
        .iter()
        .map(|d| {
            let w = d.weights.rows().into_iter().map(|r| r.to_vec()).collect();
            (w, d.bias.to_vec())
        })
        .collect()
}

/// Values frozen at the base point: ẑ, z_q, z_q − ẑ and the assignments.
pub struct Frozen {
    pub z_hat: Vec<Vec<f64>>,
    pub z_q: Vec<Vec<f64>>,
    pub indices: Vec<usize>,
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Batch-mean surrogate loss: the decoder reads ẑ + (z_q − ẑ)|frozen and the
/// stop-gradient arguments are the frozen values.
pub fn surrogate(
    params: &ModelParams,
    codebook: &Codebook,
    x: &Array2<f64>,
    labels: &[BehaviorClass],
    frozen: &Frozen,
    w: LossWeights,
) -> f64 {
    let enc = layers(&params.encoder);
    let dec = layers(&params.decoder);
    let cls = vec![(
        params.classifier.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
        params.classifier.bias.to_vec(),
    )];
    let mut total = 0.0;
    for (m, row) in x.rows().into_iter().enumerate() {
        let xm = row.to_vec();
        let z = mlp(&enc, &xm);
        let shift: Vec<f64> = frozen.z_q[m].iter().zip(&frozen.z_hat[m]).map(|(q, h)| q - h).collect();
        let dec_in: Vec<f64> = z.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let rec = mlp(&dec, &dec_in);
        let entry = codebook.entry(frozen.indices[m]).to_vec();
        let logits = mlp(&cls, &z);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let ce = lse - logits[labels[m].index()];
        total += sq(&xm, &rec) + sq(&frozen.z_hat[m], &entry) + w.beta * sq(&frozen.z_q[m], &z) + w.lambda * ce;
    }
    total / x.nrows() as f64
}

pub struct GradCheck {
    pub coordinates: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Compares every analytic gradient coordinate of a reduced network on a
/// 3-sample batch against central differences of the surrogate loss.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = ModelDims {
        input: 6,
        hidden: vec![5, 4],
        latent: 3,
        classes: 3,
    };
    let mut params = ModelParams::init(&dims, &mut rng).unwrap();
    let entries = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
    let mut codebook = Codebook::new(entries, 0.99, 1e-3, true).unwrap();
    let x = Array2::from_shape_fn((3, 6), |_| rng.random_range(-1.0..1.0));
    let labels = [
        BehaviorClass::LaneChangeLeft,
        BehaviorClass::LaneKeep,
        BehaviorClass::LaneChangeRight,
    ];
    let w = LossWeights { beta: 0.25, lambda: 0.2 };

    let pass = params.forward(x.view(), &codebook, ClassifierInput::Latent).unwrap();
    let grads = params.backward(x.view(), &labels, &pass, w).unwrap();
    let frozen = Frozen {
        z_hat: pass.z_hat().rows().into_iter().map(|r| r.to_vec()).collect(),
        z_q: pass.quantized.vectors.rows().into_iter().map(|r| r.to_vec()).collect(),
        indices: pass.quantized.indices.clone(),
    };

    let mut check = GradCheck {
        coordinates: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    let mut record = |name: String, a: f64, n: f64| {
        let e = rel_err(a, n);
        check.coordinates += 1;
        if e > check.max_rel {
            check.max_rel = e;
            check.worst = format!("{name}: analytic {a:e}, numeric {n:e}");
        }
    };

    let analytic: Vec<Vec<f64>> = grads.model_slices().iter().map(|s| s.to_vec()).collect();
    for (t, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let base = params.param_slices()[t][j];
            params.param_slices_mut()[t][j] = base + FD_STEP;
            let up = surrogate(&params, &codebook, &x, &labels, &frozen, w);
            params.param_slices_mut()[t][j] = base - FD_STEP;
            let down = surrogate(&params, &codebook, &x, &labels, &frozen, w);
            params.param_slices_mut()[t][j] = base;
            record(format!("tensor {t} coord {j}"), a, (up - down) / (2.0 * FD_STEP));
        }
    }
    let cb_grad: Vec<f64> = grads.codebook.iter().copied().collect();
    for (j, &a) in cb_grad.iter().enumerate() {
        let base = codebook.entries_mut()[j];
        codebook.entries_mut()[j] = base + FD_STEP;
        let up = surrogate(&params, &codebook, &x, &labels, &frozen, w);
        codebook.entries_mut()[j] = base - FD_STEP;
        let down = surrogate(&params, &codebook, &x, &labels, &frozen, w);
        codebook.entries_mut()[j] = base;
        record(format!("codebook coord {j}"), a, (up - down) / (2.0 * FD_STEP));
    }
    check
}
