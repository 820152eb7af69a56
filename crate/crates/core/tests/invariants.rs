use catalog_core::completeness::inject_new_category;
use catalog_core::nn::softmax_rows;
use catalog_core::Codebook;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), values).unwrap()
}

fn codebook_and_batch() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (1usize..12, 1usize..6, 1usize..20).prop_flat_map(|(q, r, b)| {
        (
            prop::collection::vec(-5.0..5.0f64, q * r).prop_map(move |v| matrix(q, r, v)),
            prop::collection::vec(-5.0..5.0f64, b * r).prop_map(move |v| matrix(b, r, v)),
        )
    })
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantization_picks_the_brute_force_minimum((entries, z) in codebook_and_batch()) {
        let cb = Codebook::new(entries.clone(), 0.99, 1e-3, true).unwrap();
        let out = cb.quantize(z.view()).unwrap();
        prop_assert_eq!(out.counts.iter().sum::<usize>(), z.nrows());
        for (m, row) in z.rows().into_iter().enumerate() {
            let mut best = 0;
            for k in 1..entries.nrows() {
                if sq_dist(row, entries.row(k)) < sq_dist(row, entries.row(best)) {
                    best = k;
                }
            }
            prop_assert_eq!(out.indices[m], best);
            for k in 0..entries.nrows() {
                prop_assert!(out.distances[m] <= sq_dist(row, entries.row(k)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn injection_normalizes_and_keeps_ratios(
        weights in prop::collection::vec(0.01..10.0f64, 1..40),
        p_new in 1e-6..0.5f64,
    ) {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let out = inject_new_category(&probs, p_new).unwrap();
        prop_assert_eq!(out.len(), probs.len() + 1);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(*out.last().unwrap(), p_new);
        for i in 1..probs.len() {
            prop_assert!((out[i] / out[0] - probs[i] / probs[0]).abs() <= 1e-12 * (probs[i] / probs[0]));
        }
    }

    #[test]
    fn softmax_rows_are_probability_vectors(
        values in prop::collection::vec(-50.0..50.0f64, 3..60),
    ) {
        let rows = values.len() / 3;
        let logits = matrix(rows, 3, values[..rows * 3].to_vec());
        let p = softmax_rows(&logits);
        for row in p.rows() {
            prop_assert!(row.iter().all(|&v| v > 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reinit_stays_between_entry_and_anchor(
        (entries, z) in codebook_and_batch(),
        usage_seed in any::<u64>(),
    ) {
        let mut cb = Codebook::new(entries.clone(), 0.99, 1e-3, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(usage_seed);
        let q = entries.nrows();
        // a few random batches so that α spans (0, 1)
        for _ in 0..rng.random_range(0..4) {
            let mut counts = vec![0; q];
            for _ in 0..z.nrows() {
                counts[rng.random_range(0..q)] += 1;
            }
            cb.update_usage(&counts, z.nrows(), 1, 1).unwrap();
        }
        let alphas = cb.decay_factors();
        let anchors = cb.select_anchors(z.view()).unwrap();
        cb.reinit_entries(z.view(), &anchors, &alphas).unwrap();
        for k in 0..q {
            prop_assert!(alphas[k] > 0.0 && alphas[k] <= (-1e-3f64).exp());
            for d in 0..entries.ncols() {
                let (a, b) = (entries[[k, d]], z[[anchors[k], d]]);
                let v = cb.entries()[[k, d]];
                let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
                prop_assert!(v >= a.min(b) - tol && v <= a.max(b) + tol, "{v} not in [{a}, {b}]");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn usage_ema_telescopes(q in 1usize..32, batch in 1usize..128, seed in any::<u64>()) {
        let mut cb = Codebook::new(Array2::zeros((q, 2)), 0.99, 1e-3, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0; q];
        for t in 1..=10_000i32 {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..batch {
                counts[rng.random_range(0..q)] += 1;
            }
            cb.update_usage(&counts, batch, 1, 1).unwrap();
            let sum: f64 = cb.ema_usage().iter().sum();
            prop_assert!((sum - (1.0 - 0.99f64.powi(t))).abs() < 1e-9, "t={t}: {sum}");
            prop_assert!(cb.ema_usage().iter().all(|&n| n >= 0.0));
        }
    }
}
