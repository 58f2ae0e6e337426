//! Poisson CP fitting behaviour on random count tensors.

mod common;

use common::*;
use ptc_core::*;

#[test]
fn loglik_trace_is_non_decreasing() {
    for seed in 0..40u64 {
        let dims: Vec<usize> = (0..3).map(|k| 2 + ((seed as usize) * 7 + k * 3) % 5).collect();
        let t = random_counts(&dims, 0.4, seed);
        let rank = 1 + seed as usize % 4;
        let r = fit(&t, &FitConfig::new(rank).with_seed(seed)).unwrap();
        for w in r.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn rank_one_fit_is_marginal_mle() {
    for seed in 0..20u64 {
        let dims = [3 + seed as usize % 3, 4, 2 + seed as usize % 4];
        let t = random_counts(&dims, 0.5, seed + 1000);
        let total = t.total() as f64;
        let r = fit(&t, &FitConfig::new(1).with_seed(seed)).unwrap();
        let m = &r.model;
        assert!((m.weights()[0] - total).abs() < 1e-6 * total);
        for (k, &nk) in dims.iter().enumerate() {
            let mut marg = vec![0.0; nk];
            for (idx, c) in t.iter_indexed() {
                marg[idx.as_slice()[k]] += c as f64;
            }
            for i in 0..nk {
                assert!((m.factor(k)[[i, 0]] - marg[i] / total).abs() < 1e-6, "mode {k} index {i}");
            }
        }
    }
}

#[test]
fn rank_two_fits_at_least_as_well_as_rank_one() {
    for seed in 0..30u64 {
        let t = random_counts(&[4, 5, 3], 0.35, seed + 77);
        let l1 = *fit(&t, &FitConfig::new(1).with_seed(seed)).unwrap().loglik_trace.last().unwrap();
        let l2 = *fit(&t, &FitConfig::new(2).with_seed(seed)).unwrap().loglik_trace.last().unwrap();
        assert!(l2 >= l1 - 1e-8, "seed {seed}: rank 2 {l2} < rank 1 {l1}");
    }
}

#[test]
fn fitted_mass_equals_total_count() {
    for seed in 0..20u64 {
        let t = random_counts(&[5, 4, 4], 0.3, seed + 5);
        let r = fit(&t, &FitConfig::new(3).with_seed(seed)).unwrap();
        let mass = kruskal_total_mass(&r.model).unwrap();
        let total = t.total() as f64;
        assert!((mass - total).abs() < 1e-6 * total);
        assert!(r.model.max_column_deviation() < 1e-9);
    }
}

#[test]
fn trace_reports_log_likelihood_of_final_model() {
    let t = random_counts(&[4, 4, 4], 0.4, 3);
    let r = fit(&t, &FitConfig::new(2).with_seed(9)).unwrap();
    let ll = log_likelihood(&r.model, &t).unwrap();
    assert!((ll - r.loglik_trace.last().unwrap()).abs() < 1e-9 * ll.abs());
}

#[test]
fn fits_are_deterministic_under_seed() {
    let t = random_counts(&[6, 6, 6], 0.2, 12);
    let a = fit(&t, &FitConfig::new(3).with_seed(4)).unwrap();
    let b = fit(&t, &FitConfig::new(3).with_seed(4)).unwrap();
    assert_eq!(a, b);
}
