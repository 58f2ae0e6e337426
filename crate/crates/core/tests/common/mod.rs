#![allow(dead_code)]

use ndarray::Array2;
use ptc_core::{BinningGrid, KruskalModel, Shape, SparseCountTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random model with unnormalized factors and uneven weights.
pub fn random_model(dims: &[usize], rank: usize, seed: u64) -> KruskalModel {
    let mut g = rng(seed);
    let factors = dims
        .iter()
        .map(|&n| Array2::from_shape_fn((n, rank), |_| g.random::<f64>()))
        .collect();
    let weights = (0..rank).map(|_| 0.5 + 10.0 * g.random::<f64>()).collect();
    KruskalModel::new(Shape::new(dims.to_vec()).unwrap(), weights, factors).unwrap()
}

/// Random counts on `dims` with about `fill` of the cells nonzero.
pub fn random_counts(dims: &[usize], fill: f64, seed: u64) -> SparseCountTensor {
    let mut g = rng(seed);
    let shape = Shape::new(dims.to_vec()).unwrap();
    let mut entries = Vec::new();
    for l in 0..shape.len() {
        if g.random::<f64>() < fill {
            let idx = ptc_core::delinearize(l, &shape).unwrap().0;
            entries.push((idx, g.random_range(1..20u64)));
        }
    }
    if entries.is_empty() {
        entries.push((vec![0; dims.len()], 3));
    }
    SparseCountTensor::from_entries(shape, entries).unwrap()
}

/// Grid with random, unequal bin widths.
pub fn random_grid(dims: &[usize], seed: u64) -> BinningGrid {
    let mut g = rng(seed);
    let edges = dims
        .iter()
        .map(|&n| {
            let mut e = vec![g.random_range(-2.0..0.0)];
            for _ in 0..n {
                let last = *e.last().unwrap();
                e.push(last + 0.1 + g.random::<f64>());
            }
            e
        })
        .collect();
    BinningGrid::from_edges(edges).unwrap()
}

/// Row-major odometer over every multi-index of `dims` (first index fastest).
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0; dims.len()];
    for _ in 0..n {
        out.push(idx.clone());
        for (k, &nk) in dims.iter().enumerate() {
            idx[k] += 1;
            if idx[k] < nk {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// `sum_r lambda_r prod_k A_k[i_k, r]`, written out directly.
pub fn literal_entry(m: &KruskalModel, idx: &[usize]) -> f64 {
    (0..m.rank())
        .map(|r| {
            let mut v = m.weights()[r];
            for (k, &i) in idx.iter().enumerate() {
                v *= m.factor(k)[[i, r]];
            }
            v
        })
        .sum()
}

pub fn literal_volume(g: &BinningGrid, idx: &[usize]) -> f64 {
    idx.iter()
        .enumerate()
        .map(|(k, &i)| g.edges(k)[i + 1] - g.edges(k)[i])
        .product()
}

/// `-sum_j q_j ln(q_j / V_j)` over nonnegative bin masses `q` (not renormalized).
pub fn literal_entropy(q: &[(Vec<usize>, f64)], g: &BinningGrid) -> f64 {
    -q.iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(idx, p)| p * (p / literal_volume(g, idx)).ln())
        .sum::<f64>()
}
