use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::BehaviorClass;

/// Smallest probability fed to the logarithm in the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Batch-mean terms of the quantized-autoencoder loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvqLoss {
    pub reconstruction: f64,
    /// `‖sg[ẑ] − z_q‖²`; moves the codebook.
    pub vq: f64,
    /// `‖sg[z_q] − ẑ‖²`, unweighted; moves the encoder.
    pub commitment: f64,
    pub beta: f64,
}

impl CvqLoss {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.vq + self.beta * self.commitment
    }
}

fn mean_sq_rowwise(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Reconstruction, VQ and β-weighted commitment terms, each a squared L2 norm
/// per sample averaged over the batch.
pub fn loss_cvq(
    batch: ArrayView2<'_, f64>,
    reconstructions: ArrayView2<'_, f64>,
    z_hat: ArrayView2<'_, f64>,
    z_q: ArrayView2<'_, f64>,
    beta: f64,
) -> CvqLoss {
    let latent = mean_sq_rowwise(z_hat, z_q);
    CvqLoss {
        reconstruction: mean_sq_rowwise(batch, reconstructions),
        vq: latent,
        commitment: latent,
        beta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLoss {
    pub value: f64,
    /// Samples whose true-class probability fell below [`PROB_FLOOR`].
    pub clamped: usize,
}

/// Mean cross-entropy `−Σ s_i ln p_i` of predicted probabilities against the
/// true classes.
pub fn loss_cl(labels: &[BehaviorClass], probs: &Array2<f64>) -> ClassificationLoss {
    let mut sum = 0.0;
    let mut clamped = 0;
    for (label, row) in labels.iter().zip(probs.rows()) {
        let p = row[label.index()];
        if p < PROB_FLOOR {
            clamped += 1;
        }
        sum -= p.max(PROB_FLOOR).ln();
    }
    ClassificationLoss {
        value: sum / labels.len().max(1) as f64,
        clamped,
    }
}

pub fn loss_total(l_cvq: f64, l_cl: f64, lambda: f64) -> f64 {
    l_cvq + lambda * l_cl
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cvq_examples() {
        let x = array![[1.0, 2.0, 3.0]];
        let z = array![[0.5, 0.5]];
        let l = loss_cvq(x.view(), x.view(), z.view(), z.view(), 0.25);
        assert_eq!(l.total(), 0.0);

        let zq = array![[1.5, 0.5]];
        let l = loss_cvq(x.view(), x.view(), z.view(), zq.view(), 0.25);
        assert!((l.total() - 1.25).abs() < 1e-15);

        let xr = array![[1.0, 2.5, 3.0]];
        let one = loss_cvq(x.view(), xr.view(), z.view(), zq.view(), 0.25);
        let xr2 = array![[1.0, 3.0, 3.0]];
        let zq2 = array![[2.5, 0.5]];
        let two = loss_cvq(x.view(), xr2.view(), z.view(), zq2.view(), 0.25);
        assert!((two.reconstruction - 4.0 * one.reconstruction).abs() < 1e-12);
        assert!((two.vq - 4.0 * one.vq).abs() < 1e-12);
        assert!((two.commitment - 4.0 * one.commitment).abs() < 1e-12);
    }

    #[test]
    fn cvq_averages_over_batch() {
        let x = array![[0.0], [0.0]];
        let xr = array![[1.0], [3.0]];
        let z = array![[0.0], [0.0]];
        let l = loss_cvq(x.view(), xr.view(), z.view(), z.view(), 0.25);
        assert_eq!(l.reconstruction, 5.0);
    }

    #[test]
    fn cross_entropy_examples() {
        use BehaviorClass::*;
        let l = loss_cl(&[LaneKeep], &array![[0.0, 1.0, 0.0]]);
        assert_eq!(l.value, 0.0);
        let third = 1.0 / 3.0;
        let l = loss_cl(&[LaneKeep], &array![[third, third, third]]);
        assert!((l.value - 3f64.ln()).abs() < 1e-12);
        assert!((l.value - 1.0986).abs() < 1e-4);
        let l = loss_cl(&[LaneChangeLeft], &array![[0.5, 0.25, 0.25]]);
        assert!((l.value - 2f64.ln()).abs() < 1e-12);
        let l = loss_cl(&[LaneChangeRight], &array![[0.5, 0.5, 0.0]]);
        assert_eq!(l.clamped, 1);
        assert!((l.value - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn total_examples() {
        assert_eq!(loss_total(1.25, 3.0, 0.0), 1.25);
        assert_eq!(loss_total(1.25, 0.0, 0.2), 1.25);
        let t = loss_total(1.25, 3f64.ln(), 0.2);
        assert!((t - 1.4697).abs() < 1e-4);
    }
}
