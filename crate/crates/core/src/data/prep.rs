use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BehaviorClass, Dataset, Scenario, SplitTag, FEATURES, FEAT_X, FEAT_Y, NUM_CLASSES, N_MAX, T_OBS};
use crate::error::{Error, Result};
use crate::rng;

/// Translates every present vehicle so the target sits at the origin at the
/// first time step. Velocities are unchanged.
pub fn transform_to_target_frame(scenario: &Scenario) -> Scenario {
    let x0 = scenario.get(0, FEAT_X, 0);
    let y0 = scenario.get(0, FEAT_Y, 0);
    scenario.map_present(|_, feature, v| match feature {
        FEAT_X => v - x0,
        FEAT_Y => v - y0,
        _ => v,
    })
}

/// Per-feature standardization statistics over present vehicle slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; FEATURES],
    pub std: [f64; FEATURES],
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; FEATURES],
            std: [1.0; FEATURES],
        }
    }

    /// Fits mean and population standard deviation per feature over every
    /// present slot and time step. A feature with zero spread keeps std 1.
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Invalid("cannot fit normalization on an empty dataset".into()));
        }
        let mut sum = [0.0; FEATURES];
        let mut sum_sq = [0.0; FEATURES];
        let mut n = 0usize;
        for s in &dataset.scenarios {
            for slot in (0..N_MAX).filter(|&k| s.presence()[k]) {
                n += T_OBS;
                for f in 0..FEATURES {
                    for t in 0..T_OBS {
                        let v = s.get(slot, f, t);
                        sum[f] += v;
                        sum_sq[f] += v * v;
                    }
                }
            }
        }
        let n = n as f64;
        let mut mean = [0.0; FEATURES];
        let mut std = [1.0; FEATURES];
        for f in 0..FEATURES {
            mean[f] = sum[f] / n;
            let var = (sum_sq[f] / n - mean[f] * mean[f]).max(0.0);
            if var > 1e-12 {
                std[f] = var.sqrt();
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, s: &Scenario) -> Scenario {
        s.map_present(|_, f, v| (v - self.mean[f]) / self.std[f])
    }

    pub fn invert_value(&self, feature: usize, v: f64) -> f64 {
        v * self.std[feature] + self.mean[feature]
    }
}

fn indices_by_class(dataset: &Dataset) -> [Vec<usize>; NUM_CLASSES] {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, s) in dataset.scenarios.iter().enumerate() {
        by_class[s.class().index()].push(i);
    }
    by_class
}

fn subset(dataset: &Dataset, mut keep: Vec<usize>, split: SplitTag) -> Dataset {
    keep.sort_unstable();
    Dataset {
        scenarios: keep.into_iter().map(|i| dataset.scenarios[i].clone()).collect(),
        split,
        normalization: dataset.normalization,
    }
}

/// Undersamples every class to the smallest class count. The kept scenarios
/// retain their original order.
pub fn balance_dataset(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let by_class = indices_by_class(dataset);
    for c in BehaviorClass::ALL {
        if by_class[c.index()].is_empty() {
            return Err(Error::EmptyClass(c.short_name()));
        }
    }
    let target = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = rng::seeded(seed, rng::stream::BALANCE);
    let mut keep = Vec::with_capacity(target * NUM_CLASSES);
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..target]);
    }
    Ok(subset(dataset, keep, dataset.split))
}

/// Stratified split. The train part has exactly `round(len * train_fraction)`
/// scenarios, distributed over classes by largest remainder.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let by_class = indices_by_class(dataset);
    let total_train = (dataset.len() as f64 * train_fraction).round() as usize;

    let quotas: Vec<f64> = by_class.iter().map(|v| v.len() as f64 * train_fraction).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = total_train.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(NUM_CLASSES * 2) {
        if remaining == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            remaining -= 1;
        }
    }

    let mut rng = rng::seeded(seed, rng::stream::SPLIT);
    let mut train = Vec::with_capacity(total_train);
    let mut test = Vec::with_capacity(dataset.len() - total_train);
    for (c, mut idx) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..take[c]]);
        test.extend_from_slice(&idx[take[c]..]);
    }
    Ok((
        subset(dataset, train, SplitTag::Train),
        subset(dataset, test, SplitTag::Test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{grid_index, FEAT_VX, SCENARIO_LEN};

    fn scenario(class: BehaviorClass, tag: f64) -> Scenario {
        let mut v = vec![0.0; SCENARIO_LEN];
        v[grid_index(0, FEAT_VX, 0)] = tag;
        let mut presence = [false; N_MAX];
        presence[0] = true;
        Scenario::new(v, presence, class).unwrap()
    }

    fn dataset(counts: [usize; 3]) -> Dataset {
        let mut scenarios = Vec::new();
        let mut tag = 0.0;
        for (c, &n) in BehaviorClass::ALL.iter().zip(&counts) {
            for _ in 0..n {
                scenarios.push(scenario(*c, tag));
                tag += 1.0;
            }
        }
        Dataset::new(scenarios, SplitTag::All)
    }

    fn tags(d: &Dataset) -> Vec<f64> {
        d.scenarios.iter().map(|s| s.get(0, FEAT_VX, 0)).collect()
    }

    #[test]
    fn translate_to_target_origin() {
        let mut v = vec![0.0; SCENARIO_LEN];
        let mut presence = [false; N_MAX];
        presence[0] = true;
        presence[1] = true;
        v[grid_index(0, FEAT_X, 0)] = 100.0;
        v[grid_index(0, FEAT_Y, 0)] = 5.0;
        v[grid_index(0, FEAT_VX, 0)] = 30.0;
        v[grid_index(1, FEAT_X, 0)] = 120.0;
        v[grid_index(1, FEAT_Y, 0)] = 5.0;
        let s = Scenario::new(v, presence, BehaviorClass::LaneKeep).unwrap();
        let out = transform_to_target_frame(&s);
        assert_eq!(out.get(0, FEAT_X, 0), 0.0);
        assert_eq!(out.get(0, FEAT_Y, 0), 0.0);
        assert_eq!(out.get(1, FEAT_X, 0), 20.0);
        assert_eq!(out.get(1, FEAT_Y, 0), 0.0);
        assert_eq!(out.get(0, FEAT_VX, 0), 30.0);
        // a later time step moves by the same offset
        assert_eq!(out.get(0, FEAT_X, 1), -100.0);
        // absent slots stay zero
        assert_eq!(out.get(5, FEAT_X, 0), 0.0);
        assert_eq!(transform_to_target_frame(&out), out);
    }

    #[test]
    fn balance_to_minimum() {
        let d = dataset([10, 5, 5]);
        assert_eq!(balance_dataset(&d, 1).unwrap().class_counts(), [5, 5, 5]);
        let even = dataset([5, 5, 5]);
        assert_eq!(balance_dataset(&even, 1).unwrap(), even);
    }

    #[test]
    fn balance_is_seeded() {
        let d = dataset([20, 7, 9]);
        let a = balance_dataset(&d, 3).unwrap();
        let b = balance_dataset(&d, 3).unwrap();
        assert_eq!(tags(&a), tags(&b));
        let c = balance_dataset(&d, 4).unwrap();
        assert_ne!(tags(&a), tags(&c));
    }

    #[test]
    fn balance_rejects_empty_class() {
        let d = dataset([4, 0, 3]);
        assert!(matches!(balance_dataset(&d, 0), Err(Error::EmptyClass("kl"))));
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = dataset([34, 33, 33]);
        let (train, test) = split(&d, 0.7, 9).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
        assert_eq!(train.split, SplitTag::Train);
        let mut all: Vec<f64> = tags(&train).into_iter().chain(tags(&test)).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, tags(&d));
        for c in 0..3 {
            let ratio = train.class_counts()[c] as f64 / d.class_counts()[c] as f64;
            assert!((ratio - 0.7).abs() < 0.05);
        }
    }

    #[test]
    fn split_rejects_degenerate_fraction() {
        let d = dataset([3, 3, 3]);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&d, f, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn seventy_percent_split_proportion() {
        let fraction: f64 = 9841.0 / (9841.0 + 4217.0);
        assert!((fraction - 0.70).abs() < 0.005);
        let d = dataset([100, 100, 100]);
        let (train, test) = split(&d, fraction, 2).unwrap();
        assert_eq!(train.len(), 210);
        assert_eq!(test.len(), 90);
    }

    #[test]
    fn normalization_skips_absent_slots() {
        let d = dataset([2, 2, 2]);
        let n = Normalization::fit(&d).unwrap();
        let out = n.apply(&d.scenarios[3]);
        assert_eq!(out.get(3, FEAT_VX, 0), 0.0);
        let back = n.invert_value(FEAT_VX, out.get(0, FEAT_VX, 0));
        assert!((back - d.scenarios[3].get(0, FEAT_VX, 0)).abs() < 1e-12);
    }
}
