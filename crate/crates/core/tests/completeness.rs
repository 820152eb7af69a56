use catalog_core::completeness::{inject_new_category, pilot, s_min, simulate_range};
use catalog_core::{completeness_report, CategoryDistribution, CompletenessConfig};

/// P(T ≤ n) for the coupon collector by inclusion–exclusion over subsets
/// of categories that are still missing after n draws.
fn exact_cdf(p: &[f64], n: u64) -> f64 {
    let k = p.len();
    (0u32..1 << k)
        .map(|mask| {
            let missing: f64 = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 - missing).powi(n as i32)
        })
        .sum()
}

/// E[T] = Σ over non-empty subsets S of (−1)^{|S|+1} / p_S.
fn exact_mean(p: &[f64]) -> f64 {
    let k = p.len();
    (1u32..1 << k)
        .map(|mask| {
            let ps: f64 = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            sign / ps
        })
        .sum()
}

fn exact_quantile(p: &[f64], tau: f64) -> u64 {
    (1..).find(|&n| exact_cdf(p, n) >= tau).unwrap()
}

#[test]
fn oracle_sanity() {
    assert!((exact_cdf(&[0.5, 0.5], 5) - 0.9375).abs() < 1e-15);
    assert!((exact_cdf(&[0.5, 0.5], 6) - 0.96875).abs() < 1e-15);
    let h10: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
    assert!((exact_mean(&[0.1; 10]) - 10.0 * h10).abs() < 1e-9);
}

#[test]
fn two_uniform_categories_need_six_draws() {
    let samples = simulate_range(&[0.5, 0.5], 7, 0..100_000).unwrap();
    assert_eq!(s_min(&samples, 0.95).unwrap(), 6);
    assert_eq!(s_min(&samples, 0.9).unwrap(), 5);
}

#[test]
fn quantiles_match_inclusion_exclusion() {
    let p = [0.4, 0.3, 0.15, 0.1, 0.05];
    let samples = simulate_range(&p, 11, 0..100_000).unwrap();
    let se = (0.95f64 * 0.05 / 100_000.0).sqrt();
    for tau in [0.5, 0.8, 0.95] {
        let n = exact_quantile(&p, tau);
        // the boundary must sit well away from τ for an exact comparison
        let margin = (exact_cdf(&p, n) - tau).min(tau - exact_cdf(&p, n - 1));
        if margin > 6.0 * se {
            assert_eq!(s_min(&samples, tau).unwrap(), n, "tau {tau}");
        } else {
            assert!(s_min(&samples, tau).unwrap().abs_diff(n) <= 1, "tau {tau}");
        }
    }
}

#[test]
fn pilot_mean_matches_exact_expectation() {
    let p = [0.5, 0.3, 0.2];
    let stats = pilot(&p, 100_000, 3).unwrap();
    let mean = exact_mean(&p);
    assert!((mean - 6.654761904761905).abs() < 1e-9);
    let se = stats.std / (100_000f64).sqrt();
    assert!((stats.mean - mean).abs() < 5.0 * se, "{} vs {mean}", stats.mean);
}

#[test]
fn uniform_ten_pilot_mean() {
    let stats = pilot(&[0.1; 10], 1000, 0).unwrap();
    let h10: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
    assert!((stats.mean / (10.0 * h10) - 1.0).abs() < 0.02, "{}", stats.mean);
}

#[test]
fn injected_category_dominates_the_collection_time() {
    // once p_new is far below every known probability, S_min ≈ ln(1/(1−τ)) / p_new
    let known = vec![0.25; 4];
    let probs = inject_new_category(&known, 1e-3).unwrap();
    let samples = simulate_range(&probs, 5, 0..20_000).unwrap();
    let y = s_min(&samples, 0.95).unwrap() as f64;
    let approx = (20.0f64).ln() / 1e-3;
    assert!((y / approx - 1.0).abs() < 0.05, "{y} vs {approx}");
}

#[test]
fn report_is_seed_deterministic_and_seed_sensitive() {
    let dist = CategoryDistribution::from_probabilities(vec![0.5, 0.3, 0.2]).unwrap();
    let config = CompletenessConfig {
        p_new: vec![1e-2],
        pilot: 200,
        max_sims: 2000,
        ..Default::default()
    };
    let a = completeness_report(&dist, &config).unwrap();
    let b = completeness_report(&dist, &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = completeness_report(&dist, &CompletenessConfig { seed: 1, ..config }).unwrap();
    assert_ne!(a.runs[0].pilot_mean, c.runs[0].pilot_mean);
}
