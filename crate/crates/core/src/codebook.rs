//! Vector-quantization codebook with usage-driven entry reinitialization.
//!
//! Each training batch the codebook tracks an exponential moving average of
//! how often every entry was selected. Entries that fall out of use get a
//! decay factor close to one and are pulled onto the nearest encoded feature
//! of the current batch (their anchor); busy entries get a factor near zero
//! and stay put.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{BehaviorClass, NUM_CLASSES};
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Array2<f64>,
    ema_usage: Vec<f64>,
    gamma: f64,
    epsilon: f64,
    reinit_enabled: bool,
}

/// Result of assigning a batch to its nearest entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub indices: Vec<usize>,
    /// Row `m` is the entry chosen for sample `m`.
    pub vectors: Array2<f64>,
    /// Squared distance from each sample to its chosen entry.
    pub distances: Vec<f64>,
    /// Samples assigned to each entry.
    pub counts: Vec<usize>,
    pub codebook_size: usize,
}

#[inline]
fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Codebook {
    pub fn new(entries: Array2<f64>, gamma: f64, epsilon: f64, reinit_enabled: bool) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Config("codebook needs at least one non-empty entry".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook entries".into()));
        }
        let q = entries.nrows();
        Ok(Self {
            entries,
            ema_usage: vec![0.0; q],
            gamma,
            epsilon,
            reinit_enabled,
        })
    }

    /// `q` entries drawn from N(0, 1) and scaled by `1/√dim`.
    pub fn random<R: Rng + ?Sized>(
        q: usize,
        dim: usize,
        gamma: f64,
        epsilon: f64,
        reinit_enabled: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let scale = 1.0 / (dim as f64).sqrt();
        let entries = Array2::from_shape_simple_fn((q, dim), || {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        });
        Self::new(entries, gamma, epsilon, reinit_enabled)
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn entry(&self, q: usize) -> ArrayView1<'_, f64> {
        self.entries.row(q)
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        self.entries.as_slice_mut().expect("standard layout")
    }

    pub fn ema_usage(&self) -> &[f64] {
        &self.ema_usage
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn reinit_enabled(&self) -> bool {
        self.reinit_enabled
    }

    pub(crate) fn restore_usage(&mut self, usage: Vec<f64>) -> Result<()> {
        if usage.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: usage.len(),
            });
        }
        self.ema_usage = usage;
        Ok(())
    }

    fn check_dim(&self, z: &ArrayView2<'_, f64>) -> Result<()> {
        if z.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z.ncols(),
            });
        }
        if z.nrows() == 0 {
            return Err(Error::Invalid("empty batch".into()));
        }
        Ok(())
    }

    /// Nearest entry by squared Euclidean distance; ties go to the lowest index.
    pub fn quantize(&self, z: ArrayView2<'_, f64>) -> Result<Quantized> {
        self.check_dim(&z)?;
        let q = self.len();
        let mut indices = Vec::with_capacity(z.nrows());
        let mut distances = Vec::with_capacity(z.nrows());
        let mut counts = vec![0usize; q];
        for row in z.rows() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, entry) in self.entries.rows().into_iter().enumerate() {
                let d = sq_dist(row, entry);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            indices.push(best);
            distances.push(best_d);
            counts[best] += 1;
        }
        let vectors = self.entries.select(ndarray::Axis(0), &indices);
        Ok(Quantized {
            indices,
            vectors,
            distances,
            counts,
            codebook_size: q,
        })
    }

    /// `N_q ← γ·N_q + (n_q / (B·h·w))·(1 − γ)` for every entry.
    pub fn update_usage(&mut self, counts: &[usize], batch_size: usize, h: usize, w: usize) -> Result<()> {
        if counts.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: counts.len(),
            });
        }
        let features = batch_size * h * w;
        let assigned: usize = counts.iter().sum();
        if assigned != features || features == 0 {
            return Err(Error::Invalid(format!(
                "usage counts sum to {assigned} but the batch holds {features} encoded features"
            )));
        }
        let denom = features as f64;
        for (n, &c) in self.ema_usage.iter_mut().zip(counts) {
            *n = *n * self.gamma + (c as f64 / denom) * (1.0 - self.gamma);
        }
        Ok(())
    }

    /// `α_q = exp(−N_q·Q·10/(1 − γ) − ε)`.
    pub fn decay_factors(&self) -> Vec<f64> {
        let q = self.len() as f64;
        self.ema_usage
            .iter()
            .map(|&n| (-n * q * 10.0 / (1.0 - self.gamma) - self.epsilon).exp())
            .collect()
    }

    /// Batch position of the encoded feature closest to each entry; ties go
    /// to the lowest batch position.
    pub fn select_anchors(&self, z: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        self.check_dim(&z)?;
        Ok(self
            .entries
            .rows()
            .into_iter()
            .map(|entry| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (m, row) in z.rows().into_iter().enumerate() {
                    let d = sq_dist(row, entry);
                    if d < best_d {
                        best = m;
                        best_d = d;
                    }
                }
                best
            })
            .collect())
    }

    /// `z_q ← z_q·(1 − α_q) + anchor_q·α_q`. No-op when reinitialization is
    /// disabled.
    pub fn reinit_entries(&mut self, z: ArrayView2<'_, f64>, anchors: &[usize], alphas: &[f64]) -> Result<()> {
        if !self.reinit_enabled {
            return Ok(());
        }
        self.check_dim(&z)?;
        if anchors.len() != self.len() || alphas.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: anchors.len().min(alphas.len()),
            });
        }
        for ((mut entry, &a), &alpha) in self.entries.rows_mut().into_iter().zip(anchors).zip(alphas) {
            let anchor = z.row(a);
            entry.zip_mut_with(&anchor, |e, &v| *e = *e * (1.0 - alpha) + v * alpha);
        }
        Ok(())
    }

    /// One maintenance cycle for a batch of encoded features `z` whose
    /// assignment counts are `counts`: usage update, decay, anchors, reinit.
    pub fn maintain(&mut self, z: ArrayView2<'_, f64>, counts: &[usize], h: usize, w: usize) -> Result<()> {
        self.update_usage(counts, z.nrows(), h, w)?;
        if self.reinit_enabled {
            let alphas = self.decay_factors();
            let anchors = self.select_anchors(z)?;
            self.reinit_entries(z, &anchors, &alphas)?;
        }
        Ok(())
    }
}

/// Codebook usage over a full dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub codebook_size: usize,
    /// Entries with at least one assignment.
    pub used: usize,
    pub counts: Vec<usize>,
    /// Per-entry ground-truth class composition in (lcl, kl, lcr) order.
    pub class_counts: Vec<[usize; NUM_CLASSES]>,
}

impl UsageStats {
    pub fn fraction(&self) -> f64 {
        self.used as f64 / self.codebook_size as f64
    }
}

pub fn usage_stats(assignments: &[usize], labels: &[BehaviorClass], codebook_size: usize) -> Result<UsageStats> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: assignments.len(),
            actual: labels.len(),
        });
    }
    let mut counts = vec![0usize; codebook_size];
    let mut class_counts = vec![[0usize; NUM_CLASSES]; codebook_size];
    for (&q, label) in assignments.iter().zip(labels) {
        if q >= codebook_size {
            return Err(Error::Invalid(format!("assignment {q} outside codebook of size {codebook_size}")));
        }
        counts[q] += 1;
        class_counts[q][label.index()] += 1;
    }
    Ok(UsageStats {
        codebook_size,
        used: counts.iter().filter(|&&c| c > 0).count(),
        counts,
        class_counts,
    })
}

/// Writes `entry,n_ema,assigned,v0..v{R-1}`, one row per entry.
pub fn write_codebook_csv(path: &Path, codebook: &Codebook, assigned: &[usize]) -> Result<()> {
    let mut out = String::from("entry,n_ema,assigned");
    for j in 0..codebook.dim() {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for (q, entry) in codebook.entries.rows().into_iter().enumerate() {
        out.push_str(&format!("{q},{:?},{}", codebook.ema_usage[q], assigned.get(q).copied().unwrap_or(0)));
        for v in entry {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn two_entry() -> Codebook {
        Codebook::new(array![[0.0, 0.0], [1.0, 1.0]], 0.99, 1e-3, true).unwrap()
    }

    #[test]
    fn nearest_entry() {
        let cb = two_entry();
        let q = cb.quantize(array![[0.1, 0.1], [1.0, 1.0]].view()).unwrap();
        assert_eq!(q.indices, vec![0, 1]);
        assert_eq!(q.distances[1], 0.0);
        assert_eq!(q.counts, vec![1, 1]);
        assert_eq!(q.vectors.row(1), array![1.0, 1.0]);
    }

    #[test]
    fn equidistant_goes_to_lowest_index() {
        let cb = two_entry();
        // 0.5² + 0.5² = 0.5 from both entries
        let q = cb.quantize(array![[0.5, 0.5]].view()).unwrap();
        assert_eq!(q.indices, vec![0]);
        assert_eq!(q.distances[0], 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let cb = two_entry();
        assert!(matches!(
            cb.quantize(array![[0.5, 0.5, 0.5]].view()),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn usage_update_examples() {
        let mut cb = Codebook::random(64, 4, 0.99, 1e-3, true, &mut rng::seeded(0, 0)).unwrap();
        let mut counts = vec![0; 64];
        counts[0] = 64;
        cb.update_usage(&counts, 64, 1, 1).unwrap();
        assert!((cb.ema_usage()[0] - 0.01).abs() < 1e-15);
        assert_eq!(cb.ema_usage()[1], 0.0);
        cb.update_usage(&counts, 64, 1, 1).unwrap();
        assert!((cb.ema_usage()[0] - 0.01 * 1.99).abs() < 1e-15);

        let before = cb.ema_usage()[0];
        let mut other = vec![0; 64];
        other[5] = 64;
        cb.update_usage(&other, 64, 1, 1).unwrap();
        assert!((cb.ema_usage()[0] - before * 0.99).abs() < 1e-15);
    }

    #[test]
    fn usage_requires_full_assignment() {
        let mut cb = two_entry();
        assert!(cb.update_usage(&[3, 0], 4, 1, 1).is_err());
        assert!(cb.update_usage(&[3, 1], 4, 1, 1).is_ok());
    }

    #[test]
    fn decay_examples() {
        let mut cb = Codebook::random(64, 4, 0.99, 1e-3, true, &mut rng::seeded(0, 0)).unwrap();
        let alpha = cb.decay_factors();
        assert!((alpha[0] - (-1e-3f64).exp()).abs() < 1e-15);
        assert!((alpha[0] - 0.9990).abs() < 1e-4);
        let mut counts = vec![0; 64];
        counts[0] = 64;
        cb.update_usage(&counts, 64, 1, 1).unwrap();
        let alpha = cb.decay_factors();
        // exponent −0.01·64·10/0.01 − ε = −640.001
        assert!(alpha[0] < 1e-270);
        assert!(alpha[0] < alpha[1]);
    }

    #[test]
    fn anchors() {
        let cb = Codebook::new(array![[0.0, 0.0], [5.0, 5.0], [2.0, 0.0]], 0.99, 1e-3, true).unwrap();
        assert_eq!(cb.select_anchors(array![[9.0, 9.0]].view()).unwrap(), vec![0, 0, 0]);
        let batch = array![[4.0, 4.0], [0.0, 0.0], [1.0, 0.0], [3.0, 0.0]];
        // entry 2 is equidistant to positions 2 and 3 → lowest position
        assert_eq!(cb.select_anchors(batch.view()).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn reinit_examples() {
        let mut cb = Codebook::new(array![[0.0, 0.0], [3.0, 3.0], [1.0, 1.0]], 0.99, 1e-3, true).unwrap();
        let z = array![[1.0, 0.0], [7.0, 7.0]];
        cb.reinit_entries(z.view(), &[0, 1, 0], &[0.5, 1.0, 0.0]).unwrap();
        assert_eq!(cb.entries(), &array![[0.5, 0.0], [7.0, 7.0], [1.0, 1.0]]);
    }

    #[test]
    fn reinit_disabled_is_noop() {
        let mut cb = Codebook::new(array![[0.0, 0.0]], 0.99, 1e-3, false).unwrap();
        cb.reinit_entries(array![[1.0, 1.0]].view(), &[0], &[1.0]).unwrap();
        assert_eq!(cb.entries(), &array![[0.0, 0.0]]);
        cb.maintain(array![[1.0, 1.0]].view(), &[1], 1, 1).unwrap();
        assert_eq!(cb.entries(), &array![[0.0, 0.0]]);
        assert!(cb.ema_usage()[0] > 0.0);
    }

    #[test]
    fn usage_stats_examples() {
        use BehaviorClass::*;
        let labels = [LaneKeep, LaneChangeLeft, LaneKeep];
        let s = usage_stats(&[0, 0, 0], &labels, 8).unwrap();
        assert_eq!(s.used, 1);
        assert_eq!(s.fraction(), 1.0 / 8.0);
        assert_eq!(s.class_counts[0], [1, 2, 0]);
        let s = usage_stats(&[0, 1, 2], &labels, 3).unwrap();
        assert_eq!(s.used, 3);
        assert_eq!(s.counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Codebook::new(array![[0.0]], 1.0, 1e-3, true).is_err());
        assert!(Codebook::new(array![[0.0]], 0.5, 0.0, true).is_err());
    }
}
