//! Checks against brute-force dense computations.

mod common;

use common::*;
use ndarray::Array2;
use ptc_core::estimators::ptc::*;
use ptc_core::estimators::true_mean_measure;
use ptc_core::*;
use rand::Rng;
use statrs::function::erf::erfc;

#[test]
fn kruskal_entry_matches_literal_sum() {
    for seed in 0..10 {
        let dims = [3, 4, 2, 5];
        let m = random_model(&dims, 1 + seed as usize % 4, seed);
        for idx in all_indices(&dims) {
            let a = kruskal_entry(&m, &idx).unwrap();
            let b = literal_entry(&m, &idx);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{idx:?}: {a} vs {b}");
        }
    }
}

#[test]
fn total_mass_matches_dense_sum() {
    for seed in 0..10 {
        let dims = [4, 3, 5];
        let m = normalize_model(&random_model(&dims, 3, seed)).unwrap();
        let dense: f64 = all_indices(&dims).iter().map(|i| literal_entry(&m, i)).sum();
        let mass = kruskal_total_mass(&m).unwrap();
        assert!((mass - dense).abs() < 1e-9 * dense);
    }
}

#[test]
fn normalization_preserves_entries() {
    let dims = [3, 3, 4];
    let raw = random_model(&dims, 2, 7);
    let m = normalize_model(&raw).unwrap();
    for idx in all_indices(&dims) {
        let a = literal_entry(&raw, &idx);
        assert!((m.entry(&idx).unwrap() - a).abs() < 1e-12 * a.max(1.0));
    }
}

#[test]
fn ptc_entropy_matches_dense_enumeration() {
    for (seed, dims) in [(1, vec![5]), (2, vec![4, 6]), (3, vec![3, 4, 5]), (4, vec![2, 3, 2, 4]), (5, vec![6, 5, 4, 3, 2])] {
        let raw = random_model(&dims, 1 + seed as usize % 5, seed);
        let m = normalize_model(&raw).unwrap();
        let g = random_grid(&dims, seed + 100);
        let total: f64 = m.weights().iter().sum();
        let q: Vec<_> = all_indices(&dims)
            .into_iter()
            .map(|i| {
                let p = literal_entry(&m, &i) / total;
                (i, p)
            })
            .collect();
        let expect = literal_entropy(&q, &g);
        let p = PtcDensity::new(m, g).unwrap();
        let got = ptc_entropy(&p).unwrap();
        assert!((got - expect).abs() < 1e-8, "dims {dims:?}: {got} vs {expect}");
    }
}

#[test]
fn ptc_entropy_with_zero_factor_entries() {
    // Components with disjoint supports exercise the zero-skipping paths.
    let dims = [4, 4, 3];
    let mut factors = vec![Array2::zeros((4, 2)), Array2::zeros((4, 2)), Array2::zeros((3, 2))];
    factors[0][[0, 0]] = 0.5;
    factors[0][[1, 0]] = 0.5;
    factors[0][[3, 1]] = 1.0;
    factors[1][[2, 0]] = 1.0;
    factors[1][[0, 1]] = 0.25;
    factors[1][[3, 1]] = 0.75;
    factors[2][[0, 0]] = 1.0;
    factors[2][[1, 1]] = 0.4;
    factors[2][[2, 1]] = 0.6;
    let m = KruskalModel::new(Shape::new(dims.to_vec()).unwrap(), vec![3.0, 7.0], factors).unwrap();
    let g = random_grid(&dims, 9);
    let q: Vec<_> = all_indices(&dims)
        .into_iter()
        .map(|i| {
            let p = literal_entry(&m, &i) / 10.0;
            (i, p)
        })
        .collect();
    let p = PtcDensity::new(m, g.clone()).unwrap();
    assert!((ptc_entropy(&p).unwrap() - literal_entropy(&q, &g)).abs() < 1e-12);
}

#[test]
fn thresholded_entropy_matches_masked_dense_sum() {
    for seed in 0..12u64 {
        let dims = [5, 4, 6];
        let rank = 1 + seed as usize % 4;
        let m = normalize_model(&random_model(&dims, rank, seed)).unwrap();
        let g = random_grid(&dims, seed + 50);
        let total: f64 = m.weights().iter().sum();
        let tau = [0.0, 0.05, 0.15, 0.25][seed as usize % 4];

        let mut q = Vec::new();
        let mut bins = 0u128;
        let mut terms = 0u128;
        let mut mass = 0.0;
        for idx in all_indices(&dims) {
            let mut v = 0.0;
            let mut kept_any = false;
            for r in 0..rank {
                let keep = idx.iter().enumerate().all(|(k, &i)| m.factor(k)[[i, r]] >= tau);
                if keep {
                    kept_any = true;
                    terms += 1;
                    let mut t = m.weights()[r];
                    for (k, &i) in idx.iter().enumerate() {
                        t *= m.factor(k)[[i, r]];
                    }
                    v += t;
                }
            }
            if kept_any {
                bins += 1;
            }
            mass += v;
            q.push((idx, v / total));
        }
        let expect = literal_entropy(&q, &g);
        let p = PtcDensity::new(m, g).unwrap();
        let rep = ptc_entropy_thresholded(&p, tau).unwrap();
        assert!((rep.entropy_estimate - expect).abs() < 1e-10, "seed {seed}: {} vs {expect}", rep.entropy_estimate);
        assert_eq!(rep.retained_terms, terms);
        assert_eq!(rep.retained_bins, bins);
        assert!((rep.retained_mass_fraction - mass / total).abs() < 1e-12);
        assert_eq!(rep.total_terms, rank as u128 * 120);
    }
}

#[test]
fn histogram_matches_linear_scan_binning() {
    let mut g = rng(11);
    let x = Array2::from_shape_fn((400, 3), |_| g.random::<f64>() * 4.0 - 1.0);
    let grid = grid_from_samples(x.view(), &[5, 7, 3]).unwrap();
    let h = build_histogram(x.view(), &grid).unwrap();

    let mut dense = vec![0u64; grid.shape().len()];
    for row in x.rows() {
        let idx: Vec<usize> = row
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let e = grid.edges(k);
                let n = e.len() - 1;
                (0..n).find(|&i| v >= e[i] && (v < e[i + 1] || (i == n - 1 && v <= e[n]))).unwrap()
            })
            .collect();
        dense[linearize(&idx, grid.shape()).unwrap()] += 1;
    }
    for (l, c) in dense.iter().enumerate() {
        let idx = delinearize(l, grid.shape()).unwrap();
        assert_eq!(h.counts().get(idx.as_slice()).unwrap(), *c);
    }

    let s = 400.0;
    let expect: f64 = -dense
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(l, &c)| {
            let idx = delinearize(l, grid.shape()).unwrap().0;
            let p = c as f64 / s;
            p * (p / literal_volume(&grid, &idx)).ln()
        })
        .sum::<f64>();
    assert!((histogram_entropy(&h) - expect).abs() < 1e-12);
}

#[test]
fn mean_measure_matches_closed_form_cdfs() {
    let grid = BinningGrid::from_edges(vec![
        vec![-3.0, -1.0, 0.0, 0.5, 2.0, 7.0],
        vec![-0.5, 0.25, 0.75, 1.5],
    ])
    .unwrap();
    let phi = |x: f64| 0.5 * erfc(-x / 2f64.sqrt());
    let nu = true_mean_measure(&grid, &DistributionSpec::standard_normal(2), 1000).unwrap();
    for idx in all_indices(&[5, 3]) {
        let p: f64 = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| phi(grid.edges(k)[i + 1]) - phi(grid.edges(k)[i]))
            .product();
        assert!((nu.value(&idx).unwrap() - 1000.0 * p).abs() < 1e-8, "{idx:?}");
    }

    let cauchy = |x: f64| 0.5 + x.atan() / std::f64::consts::PI;
    let nu = true_mean_measure(&grid, &DistributionSpec::cauchy(2), 500).unwrap();
    for idx in all_indices(&[5, 3]) {
        let p: f64 = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| cauchy(grid.edges(k)[i + 1]) - cauchy(grid.edges(k)[i]))
            .product();
        assert!((nu.value(&idx).unwrap() - 500.0 * p).abs() < 1e-8, "{idx:?}");
    }

    let nu = true_mean_measure(&grid, &DistributionSpec::uniform_box(2, 0.0, 1.0), 100).unwrap();
    let overlap = |a: f64, b: f64| (b.min(1.0) - a.max(0.0)).max(0.0);
    let dense = nu.to_dense(1000).unwrap();
    for (l, idx) in all_indices(&[5, 3]).into_iter().enumerate() {
        let p: f64 = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| overlap(grid.edges(k)[i], grid.edges(k)[i + 1]))
            .product();
        assert!((dense[l] - 100.0 * p).abs() < 1e-12);
    }
}

#[test]
fn dense_mean_measure_respects_budget() {
    let grid = BinningGrid::from_edges(vec![vec![0.0, 0.5, 1.0]; 4]).unwrap();
    let nu = true_mean_measure(&grid, &DistributionSpec::uniform_box(4, 0.0, 1.0), 10).unwrap();
    assert!(matches!(nu.to_dense(15), Err(PtcError::Capacity { required: 16, .. })));
    assert!((nu.to_dense(16).unwrap().iter().sum::<f64>() - 10.0).abs() < 1e-12);
}
