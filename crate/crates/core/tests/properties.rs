//! Randomized invariants.

mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use ptc_core::estimators::knn::knn_entropy;
use ptc_core::estimators::ptc::*;
use ptc_core::*;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_index_round_trip(dims in dims_strategy(), pick in any::<u64>()) {
        let shape = Shape::new(dims).unwrap();
        let l = (pick % shape.len() as u64) as usize;
        let idx = delinearize(l, &shape).unwrap();
        prop_assert_eq!(linearize(idx.as_slice(), &shape).unwrap(), l);
        prop_assert!(linearize(&vec![0; shape.ndim() + 1], &shape).is_err());
    }

    #[test]
    fn normalization_is_idempotent_and_mass_preserving(dims in dims_strategy(), rank in 1usize..5, seed in any::<u64>()) {
        let raw = random_model(&dims, rank, seed);
        let once = normalize_model(&raw).unwrap();
        let twice = normalize_model(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        let dense: f64 = all_indices(&dims).iter().map(|i| literal_entry(&raw, i)).sum();
        prop_assert!((kruskal_total_mass(&once).unwrap() - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn ptc_probabilities_sum_to_one(dims in prop::collection::vec(1usize..6, 2..5), rank in 1usize..6, seed in any::<u64>()) {
        let m = normalize_model(&random_model(&dims, rank, seed)).unwrap();
        let p = PtcDensity::new(m, random_grid(&dims, seed ^ 1)).unwrap();
        let sum: f64 = all_indices(&dims).iter().map(|i| p.bin_probability(i).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn plug_in_of_log_density_is_entropy(dims in prop::collection::vec(1usize..6, 1..4), rank in 1usize..6, seed in any::<u64>()) {
        let m = normalize_model(&random_model(&dims, rank, seed)).unwrap();
        let g = random_grid(&dims, seed ^ 2);
        let p = PtcDensity::new(m, g.clone()).unwrap();
        let log_mass = p.total_mass().ln();
        let e = plug_in_expectation(&p, |idx| {
            let m = p.model().entry(idx).ok()?;
            Some(log_mass + g.log_volume(idx) - m.ln())
        })
        .unwrap();
        prop_assert!((e - ptc_entropy(&p).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn histogram_conserves_samples(s in 2usize..200, d in 1usize..4, bins in 1usize..8, seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = Array2::from_shape_fn((s, d), |_| rand::Rng::random::<f64>(&mut g));
        let grid = grid_from_samples(x.view(), &vec![bins; d]).unwrap();
        let h = build_histogram(x.view(), &grid).unwrap();
        prop_assert_eq!(h.counts().total() as usize + h.outside(), s);
        prop_assert_eq!(h.outside(), 0);
    }

    #[test]
    fn histogram_entropy_shifts_by_log_scale(s in 2usize..150, d in 1usize..4, e in -3i32..4, seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = Array2::from_shape_fn((s, d), |_| rand::Rng::random::<f64>(&mut g) - 0.5);
        let alpha = 2f64.powi(e);
        let y = &x * alpha;
        let hx = build_histogram(x.view(), &grid_from_samples(x.view(), &vec![6; d]).unwrap()).unwrap();
        let hy = build_histogram(y.view(), &grid_from_samples(y.view(), &vec![6; d]).unwrap()).unwrap();
        let diff = histogram_entropy(&hy) - histogram_entropy(&hx);
        prop_assert!((diff - d as f64 * alpha.ln()).abs() < 1e-9);
    }

    #[test]
    fn knn_is_translation_invariant_and_scale_covariant(s in 12usize..60, d in 1usize..4, shift in -64i32..64, e in -2i32..3, seed in any::<u64>()) {
        // Dyadic coordinates keep shifted and scaled distances exact.
        let mut g = rng(seed);
        let x = Array2::from_shape_fn((s, d), |_| rand::Rng::random_range(&mut g, 0..1024) as f64 / 256.0);
        let h = knn_entropy(x.view(), 3).unwrap();
        let shifted = &x + shift as f64;
        prop_assert!((knn_entropy(shifted.view(), 3).unwrap() - h).abs() < 1e-9);
        let alpha = 2f64.powi(e);
        let scaled = &x * alpha;
        prop_assert!((knn_entropy(scaled.view(), 3).unwrap() - h - d as f64 * alpha.ln()).abs() < 1e-9);
    }

    #[test]
    fn thresholding_never_adds_mass(dims in prop::collection::vec(2usize..6, 2..4), rank in 1usize..5, tau in 0.0f64..0.6, seed in any::<u64>()) {
        let m = normalize_model(&random_model(&dims, rank, seed)).unwrap();
        let p = PtcDensity::new(m, random_grid(&dims, seed ^ 3)).unwrap();
        let rep = ptc_entropy_thresholded(&p, tau).unwrap();
        prop_assert!(rep.retained_mass_fraction <= 1.0 + 1e-12);
        prop_assert!(rep.retained_terms <= rep.total_terms);
        prop_assert!(rep.first_order_retained_terms <= rep.retained_terms as i128);
        prop_assert!(rep.retained_bins <= p.grid().shape().len() as u128);
    }
}
