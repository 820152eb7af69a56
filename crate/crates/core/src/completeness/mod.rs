//! Coupon-collector estimate of the minimum dataset size.
//!
//! A hypothetical unseen category with probability `p_new` is added to the
//! observed distribution. Each simulation draws with replacement until every
//! category has appeared once; the number of draws is one sample `S_i`. A
//! pilot run fixes the standard deviation, which sets how many simulations
//! are needed for the requested standard error. `S_min` is the smallest size
//! at which the empirical fraction of completed collections reaches `τ`.
//!
//! Simulation `i` for a given `p_new` always uses ChaCha8 stream `i` of a key
//! derived from the master seed and `p_new`, so results do not depend on the
//! number of worker threads.

pub mod alias;

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::CategoryDistribution;
use crate::rng;

pub use alias::AliasTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletenessConfig {
    pub p_new: Vec<f64>,
    pub tau: Vec<f64>,
    /// Confidence constant; the sample count scales with its square.
    pub c: f64,
    /// Target standard error of the mean collection length.
    pub e: f64,
    /// Pilot simulations R.
    pub pilot: usize,
    /// Upper bound I_max on the total number of simulations.
    pub max_sims: usize,
    pub seed: u64,
}

impl Default for CompletenessConfig {
    fn default() -> Self {
        Self {
            p_new: vec![1e-3, 1e-4, 1e-5],
            tau: vec![0.95],
            c: 1.96,
            e: 0.01,
            pilot: 1000,
            max_sims: 100_000,
            seed: 0,
        }
    }
}

impl CompletenessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_new.is_empty() || self.tau.is_empty() {
            return Err(Error::Config("p_new and tau lists must not be empty".into()));
        }
        if let Some(p) = self.p_new.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("p_new must lie in [0, 1), got {p}")));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {t}")));
        }
        if !(self.c > 0.0 && self.c.is_finite() && self.e > 0.0 && self.e.is_finite()) {
            return Err(Error::Config("c and e must be positive".into()));
        }
        if self.pilot < 2 {
            return Err(Error::Config("pilot needs at least 2 simulations".into()));
        }
        if self.max_sims < self.pilot {
            return Err(Error::Config(format!(
                "max_sims ({}) must be at least the pilot count ({})",
                self.max_sims, self.pilot
            )));
        }
        Ok(())
    }
}

/// Scales the known probabilities by `1 − p_new` and appends `p_new`.
/// `p_new = 0` returns the distribution unchanged.
pub fn inject_new_category(probabilities: &[f64], p_new: f64) -> Result<Vec<f64>> {
    if !(p_new >= 0.0 && p_new < 1.0) {
        return Err(Error::Invalid(format!("p_new must lie in [0, 1), got {p_new}")));
    }
    if p_new == 0.0 {
        return Ok(probabilities.to_vec());
    }
    let mut out: Vec<f64> = probabilities.iter().map(|p| p * (1.0 - p_new)).collect();
    out.push(p_new);
    Ok(out)
}

/// Number of draws until each of `k` categories has been seen, or `None` if
/// the draws run out first.
pub fn collection_length<I: IntoIterator<Item = usize>>(draws: I, k: usize) -> Option<u64> {
    if k == 0 {
        return Some(0);
    }
    let mut seen = vec![false; k];
    let mut missing = k;
    for (n, d) in draws.into_iter().enumerate() {
        if d < k && !seen[d] {
            seen[d] = true;
            missing -= 1;
            if missing == 0 {
                return Some(n as u64 + 1);
            }
        }
    }
    None
}

/// Reusable sampler for repeated collections over one distribution.
#[derive(Debug, Clone)]
pub struct Collector {
    table: AliasTable,
    seen: Vec<bool>,
}

impl Collector {
    pub fn new(probabilities: &[f64]) -> Result<Self> {
        let table = AliasTable::new(probabilities)?;
        let seen = vec![false; table.len()];
        Ok(Self { table, seen })
    }

    pub fn categories(&self) -> usize {
        self.table.len()
    }

    /// One collection; returns the number of draws `S_i`.
    pub fn run<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> u64 {
        self.seen.fill(false);
        let mut missing = self.seen.len();
        let mut draws = 0u64;
        loop {
            let d = self.table.sample(rng.next_u64());
            draws += 1;
            let s = &mut self.seen[d];
            if !*s {
                *s = true;
                missing -= 1;
                if missing == 0 {
                    return draws;
                }
            }
        }
    }
}

/// One collection over `probabilities`, which must all be positive.
pub fn simulate_collection<R: RngCore + ?Sized>(probabilities: &[f64], rng: &mut R) -> Result<u64> {
    Ok(Collector::new(probabilities)?.run(rng))
}

fn stream_key(seed: u64, p_new: f64) -> u64 {
    rng::mix(seed, p_new.to_bits())
}

/// Runs simulations `range` with per-index streams of `key`, in index order.
pub fn simulate_range(probabilities: &[f64], key: u64, range: std::ops::Range<u64>) -> Result<Vec<u64>> {
    let collector = Collector::new(probabilities)?;
    let base = ChaCha8Rng::seed_from_u64(key);
    Ok(range
        .into_par_iter()
        .map_init(
            || (collector.clone(), base.clone()),
            |(c, r), i| {
                r.set_stream(i);
                r.set_word_pos(0);
                c.run(r)
            },
        )
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotStats {
    pub mean: f64,
    /// Sample standard deviation (denominator `R − 1`).
    pub std: f64,
}

pub fn mean_std(samples: &[u64]) -> PilotStats {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
    let std = if samples.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    PilotStats { mean, std }
}

/// `R` collections from streams `0..R` of `seed`.
pub fn pilot(probabilities: &[f64], r: usize, seed: u64) -> Result<PilotStats> {
    if r < 2 {
        return Err(Error::Invalid("pilot needs at least 2 simulations".into()));
    }
    Ok(mean_std(&simulate_range(probabilities, seed, 0..r as u64)?))
}

/// `⌈c²σ²/e²⌉`, saturating at `u64::MAX`.
pub fn required_sims(sigma: f64, c: f64, e: f64) -> u64 {
    let v = (c * c * sigma * sigma / (e * e)).ceil();
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v as u64
    }
}

/// Smallest `Y` with `#{S_i ≤ Y} / n ≥ τ`.
pub fn s_min(samples: &[u64], tau: f64) -> Result<u64> {
    if samples.is_empty() {
        return Err(Error::Invalid("s_min needs at least one sample".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    let n = samples.len();
    let covers = |k: usize| k as f64 / n as f64 >= tau;
    let mut k = ((tau * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && covers(k - 1) {
        k -= 1;
    }
    while !covers(k) {
        k += 1;
    }
    let mut scratch = samples.to_vec();
    let (_, y, _) = scratch.select_nth_unstable(k - 1);
    Ok(*y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    pub s_min: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PNewResult {
    pub p_new: f64,
    pub categories: usize,
    pub pilot_mean: f64,
    pub pilot_std: f64,
    pub required_sims: u64,
    pub executed_sims: u64,
    /// Set when `required_sims` exceeded the cap; `S_min` is then approximate.
    pub cap_applied: bool,
    /// Set when `p_new` is not below every observed probability.
    pub p_new_not_rarest: bool,
    pub results: Vec<TauResult>,
    /// Every `S_i`, pilot included. Written to CSV, not to JSON.
    #[serde(skip)]
    pub samples: Vec<u64>,
}

impl PNewResult {
    pub fn s_min(&self, tau: f64) -> Option<u64> {
        self.results.iter().find(|r| r.tau == tau).map(|r| r.s_min)
    }

    /// Writes `s,count,cumulative_fraction` over the distinct sample values.
    pub fn write_samples_csv(&self, path: &Path) -> Result<()> {
        let mut sorted = self.samples.clone();
        sorted.sort_unstable();
        let n = sorted.len() as f64;
        let mut out = String::from("s,count,cumulative_fraction\n");
        let mut i = 0;
        while i < sorted.len() {
            let v = sorted[i];
            let j = i + sorted[i..].partition_point(|&x| x == v);
            out.push_str(&format!("{v},{},{:?}\n", j - i, j as f64 / n));
            i = j;
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub config: CompletenessConfig,
    /// Observed categories with positive probability.
    pub known_categories: usize,
    /// Zero-probability entries removed before simulating.
    pub dropped_zero: usize,
    pub min_known_probability: f64,
    pub runs: Vec<PNewResult>,
}

impl CompletenessReport {
    pub fn run(&self, p_new: f64) -> Option<&PNewResult> {
        self.runs.iter().find(|r| r.p_new == p_new)
    }

    /// One row per `(p_new, τ)`.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(
            "p_new,tau,categories,pilot_mean,pilot_std,required_sims,executed_sims,cap_applied,s_min\n",
        );
        for r in &self.runs {
            for t in &r.results {
                out.push_str(&format!(
                    "{:?},{:?},{},{:?},{:?},{},{},{},{}\n",
                    r.p_new,
                    t.tau,
                    r.categories,
                    r.pilot_mean,
                    r.pilot_std,
                    r.required_sims,
                    r.executed_sims,
                    r.cap_applied,
                    t.s_min
                ));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Inject → pilot → extend to the required count (capped) → `S_min` per τ.
///
/// The pilot samples count toward the executed total, so at least `R`
/// simulations always enter the quantile.
pub fn completeness_report(distribution: &CategoryDistribution, config: &CompletenessConfig) -> Result<CompletenessReport> {
    config.validate()?;
    let known: Vec<f64> = distribution.probabilities.iter().copied().filter(|&p| p > 0.0).collect();
    if known.is_empty() {
        return Err(Error::Invalid("distribution has no category with positive probability".into()));
    }
    let dropped_zero = distribution.len() - known.len();
    if dropped_zero > 0 {
        log::info!("dropping {dropped_zero} zero-probability categories before simulation");
    }
    let min_known = known.iter().copied().fold(f64::INFINITY, f64::min);

    let mut runs = Vec::with_capacity(config.p_new.len());
    for &p_new in &config.p_new {
        let probs = inject_new_category(&known, p_new)?;
        let p_new_not_rarest = p_new > 0.0 && p_new >= min_known * (1.0 - p_new);
        if p_new_not_rarest {
            log::warn!("p_new = {p_new} is not below the smallest observed probability {min_known}");
        }
        let key = stream_key(config.seed, p_new);
        let r = config.pilot as u64;
        let mut samples = simulate_range(&probs, key, 0..r)?;
        let stats = mean_std(&samples);
        let required = required_sims(stats.std, config.c, config.e);
        let cap = config.max_sims as u64;
        let executed = required.min(cap).max(r);
        log::info!(
            "p_new = {p_new}: pilot mean {:.3}, std {:.3}, required {required}, running {executed}",
            stats.mean,
            stats.std
        );
        samples.extend(simulate_range(&probs, key, r..executed)?);
        let results = config
            .tau
            .iter()
            .map(|&tau| Ok(TauResult { tau, s_min: s_min(&samples, tau)? }))
            .collect::<Result<Vec<_>>>()?;
        runs.push(PNewResult {
            p_new,
            categories: probs.len(),
            pilot_mean: stats.mean,
            pilot_std: stats.std,
            required_sims: required,
            executed_sims: executed,
            cap_applied: required > cap,
            p_new_not_rarest,
            results,
            samples,
        });
    }
    Ok(CompletenessReport {
        config: config.clone(),
        known_categories: known.len(),
        dropped_zero,
        min_known_probability: min_known,
        runs,
    })
}
