//! Walker/Vose alias table driven by a single `u64` per draw.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    /// Acceptance threshold of each column in units of 2⁻⁶⁴.
    threshold: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table for weights that need not be normalized. Every weight
    /// must be finite and positive.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Invalid("alias table needs at least one category".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::Invalid("too many categories".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Invalid(format!("category {i} has probability {w}; every category must be positive")));
        }
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut accept = vec![1.0; n];
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            accept[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are full columns up to rounding.
        for i in small.into_iter().chain(large) {
            accept[i] = 1.0;
            alias[i] = i as u32;
        }
        let threshold = accept
            .iter()
            .map(|&a| if a >= 1.0 { u64::MAX } else { (a * 18_446_744_073_709_551_616.0) as u64 })
            .collect();
        Ok(Self { threshold, alias })
    }

    pub fn len(&self) -> usize {
        self.alias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alias.is_empty()
    }

    /// Maps one uniform `u64` to a category: the high half of `u·n` picks the
    /// column, the low half is the uniform fraction tested against it.
    #[inline]
    pub fn sample(&self, u: u64) -> usize {
        let wide = u as u128 * self.alias.len() as u128;
        let column = (wide >> 64) as usize;
        let fraction = wide as u64;
        if fraction < self.threshold[column] {
            column
        } else {
            self.alias[column] as usize
        }
    }

    /// Probability mass the table assigns to each category.
    pub fn implied_probabilities(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut p = vec![0.0; self.len()];
        for (i, (&t, &a)) in self.threshold.iter().zip(&self.alias).enumerate() {
            let keep = if t == u64::MAX { 1.0 } else { t as f64 / 18_446_744_073_709_551_616.0 };
            p[i] += keep / n;
            p[a as usize] += (1.0 - keep) / n;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn implied_probabilities_match_weights() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let t = AliasTable::new(&w).unwrap();
        for (a, b) in t.implied_probabilities().iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = AliasTable::new(&[3.0, 1.0]).unwrap();
        let p = t.implied_probabilities();
        assert!((p[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_and_empty() {
        assert!(AliasTable::new(&[]).is_err());
        assert!(AliasTable::new(&[0.5, 0.0, 0.5]).is_err());
        assert!(AliasTable::new(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn single_category_always_drawn() {
        let t = AliasTable::new(&[1.0]).unwrap();
        for u in [0, 1, u64::MAX / 2, u64::MAX] {
            assert_eq!(t.sample(u), 0);
        }
    }

    #[test]
    fn empirical_frequencies() {
        let w = [0.05, 0.15, 0.5, 0.3];
        let t = AliasTable::new(&w).unwrap();
        let mut rng = crate::rng::seeded(11, 0);
        let n = 400_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[t.sample(rng.next_u64())] += 1;
        }
        for (c, p) in counts.iter().zip(w) {
            let f = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 5.0 * se, "{f} vs {p}");
        }
    }
}
