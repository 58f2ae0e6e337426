//! Shapes, multi-indices, sparse count tensors and Kruskal (CP) models.
//!
//! Indices are zero-based. The canonical bin <-> tensor mapping is the
//! column-major linearization (first mode varies fastest):
//!
//! ```text
//! l = i_1 + n_1 * i_2 + n_1 * n_2 * i_3 + ...
//! ```

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{PtcError, Result};

/// Column sums of a normalized factor may deviate from one by at most this much.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Sizes of each tensor mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(PtcError::arg("shape needs at least one dimension"));
        }
        let mut len: usize = 1;
        for (i, &n) in dims.iter().enumerate() {
            if n == 0 {
                return Err(PtcError::arg(format!("dimension {i} has zero size")));
            }
            len = len
                .checked_mul(n)
                .ok_or_else(|| PtcError::arg(format!("shape {dims:?} overflows the index space")))?;
        }
        Ok(Self { dims, len })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes `d`.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries `n = n_1 * ... * n_d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.dims.len() {
            return Err(PtcError::Index(format!(
                "index has {} coordinates, shape has {}",
                idx.len(),
                self.dims.len()
            )));
        }
        for (k, (&i, &n)) in idx.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(PtcError::Index(format!(
                    "coordinate {i} out of range for mode {k} of size {n}"
                )));
            }
        }
        Ok(())
    }
}

/// A zero-based position in a tensor, one coordinate per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl AsRef<[usize]> for MultiIndex {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

/// Column-major linear index of `idx`.
pub fn linearize(idx: &[usize], shape: &Shape) -> Result<usize> {
    shape.check_index(idx)?;
    Ok(linearize_unchecked(idx, shape.dims()))
}

#[inline]
pub(crate) fn linearize_unchecked(idx: &[usize], dims: &[usize]) -> usize {
    let mut l = 0;
    let mut stride = 1;
    for (&i, &n) in idx.iter().zip(dims) {
        l += i * stride;
        stride *= n;
    }
    l
}

/// Inverse of [`linearize`].
pub fn delinearize(l: usize, shape: &Shape) -> Result<MultiIndex> {
    if l >= shape.len() {
        return Err(PtcError::Index(format!(
            "linear index {l} out of range for {} entries",
            shape.len()
        )));
    }
    let mut idx = vec![0; shape.ndim()];
    delinearize_into(l, shape.dims(), &mut idx);
    Ok(MultiIndex(idx))
}

#[inline]
pub(crate) fn delinearize_into(mut l: usize, dims: &[usize], out: &mut [usize]) {
    for (o, &n) in out.iter_mut().zip(dims) {
        *o = l % n;
        l /= n;
    }
}

/// Histogram bin counts keyed by linear index. Zero counts are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCountTensor {
    shape: Shape,
    entries: BTreeMap<usize, u64>,
}

impl SparseCountTensor {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a tensor from `(index, count)` pairs; repeated indices accumulate
    /// and zero counts are dropped.
    pub fn from_entries<I, M>(shape: Shape, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (M, u64)>,
        M: AsRef<[usize]>,
    {
        let mut t = Self::new(shape);
        for (idx, c) in entries {
            let l = linearize(idx.as_ref(), &t.shape)?;
            t.add_linear(l, c);
        }
        Ok(t)
    }

    pub(crate) fn add_linear(&mut self, l: usize, c: u64) {
        if c > 0 {
            *self.entries.entry(l).or_insert(0) += c;
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn get(&self, idx: &[usize]) -> Result<u64> {
        let l = linearize(idx, &self.shape)?;
        Ok(self.entries.get(&l).copied().unwrap_or(0))
    }

    /// Nonzero entries in increasing linear-index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.entries.iter().map(|(&l, &c)| (l, c))
    }

    /// Nonzero entries with their multi-indices, in increasing linear-index order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (MultiIndex, u64)> + '_ {
        let dims = self.shape.dims();
        self.entries.iter().map(move |(&l, &c)| {
            let mut idx = vec![0; dims.len()];
            delinearize_into(l, dims, &mut idx);
            (MultiIndex(idx), c)
        })
    }
}

/// A rank-`R` CP model: `sum_r weights[r] * a_r^(1) o ... o a_r^(d)`.
///
/// Factor `k` is an `n_k x R` matrix. After [`normalize_model`] every column
/// sums to one, so the total mass of the model is the sum of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    shape: Shape,
    weights: Vec<f64>,
    factors: Vec<Array2<f64>>,
}

impl KruskalModel {
    pub fn new(shape: Shape, weights: Vec<f64>, factors: Vec<Array2<f64>>) -> Result<Self> {
        let rank = weights.len();
        if rank == 0 {
            return Err(PtcError::arg("rank must be at least 1"));
        }
        if factors.len() != shape.ndim() {
            return Err(PtcError::arg(format!(
                "{} factor matrices for a {}-mode shape",
                factors.len(),
                shape.ndim()
            )));
        }
        for (k, (f, &n)) in factors.iter().zip(shape.dims()).enumerate() {
            if f.dim() != (n, rank) {
                return Err(PtcError::arg(format!(
                    "factor {k} has shape {:?}, expected ({n}, {rank})",
                    f.dim()
                )));
            }
            if f.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(PtcError::arg(format!(
                    "factor {k} has negative or non-finite entries"
                )));
            }
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(PtcError::arg("weights must be finite and non-negative"));
        }
        Ok(Self {
            shape,
            weights,
            factors,
        })
    }

    pub(crate) fn from_parts_unchecked(
        shape: Shape,
        weights: Vec<f64>,
        factors: Vec<Array2<f64>>,
    ) -> Self {
        Self {
            shape,
            weights,
            factors,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> &Array2<f64> {
        &self.factors[k]
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Vec<f64>, &mut Vec<Array2<f64>>) {
        (&mut self.weights, &mut self.factors)
    }

    /// Model value `m_i`, in `O(R d)` without forming the dense tensor.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        self.shape.check_index(idx)?;
        Ok(self.entry_unchecked(idx))
    }

    #[inline]
    pub(crate) fn entry_unchecked(&self, idx: &[usize]) -> f64 {
        let mut total = 0.0;
        for (r, &w) in self.weights.iter().enumerate() {
            let mut p = w;
            for (f, &i) in self.factors.iter().zip(idx) {
                p *= f[[i, r]];
            }
            total += p;
        }
        total
    }

    /// Sum of the weights; the total mass when factors are column-stochastic.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest deviation of any factor column sum from one.
    pub fn max_column_deviation(&self) -> f64 {
        self.factors
            .iter()
            .flat_map(|f| f.columns().into_iter().map(|c| (c.sum() - 1.0).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    /// Per-mode marginal mass: `marginal[k][i] = sum_r w_r a_r^(k)[i]`.
    pub fn mode_marginals(&self) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .map(|f| {
                f.rows()
                    .into_iter()
                    .map(|row| row.iter().zip(&self.weights).map(|(a, w)| a * w).sum())
                    .collect()
            })
            .collect()
    }
}

/// Value of the model at `idx`.
pub fn kruskal_entry(model: &KruskalModel, idx: &[usize]) -> Result<f64> {
    model.entry(idx)
}

/// Total mass `||M||_1 = sum_r lambda_r`; requires column-stochastic factors.
pub fn kruskal_total_mass(model: &KruskalModel) -> Result<f64> {
    let dev = model.max_column_deviation();
    if dev > STOCHASTIC_TOL {
        return Err(PtcError::Invariant(format!(
            "factor columns are not stochastic (max deviation {dev:.3e})"
        )));
    }
    Ok(model.weight_sum())
}

/// Rescales each factor column to unit 1-norm, folding the scales into the weights.
///
/// Columns already within `1e-14` of unit sum are left untouched, which makes the
/// operation idempotent.
pub fn normalize_model(model: &KruskalModel) -> Result<KruskalModel> {
    let mut out = model.clone();
    normalize_in_place(&mut out)?;
    Ok(out)
}

pub(crate) fn normalize_in_place(model: &mut KruskalModel) -> Result<()> {
    let (weights, factors) = model.parts_mut();
    for (k, f) in factors.iter_mut().enumerate() {
        for (r, mut col) in f.columns_mut().into_iter().enumerate() {
            let s: f64 = col.sum();
            if s <= 0.0 || !s.is_finite() {
                return Err(PtcError::DegenerateModel(format!(
                    "column {r} of factor {k} sums to {s}"
                )));
            }
            if (s - 1.0).abs() > 1e-14 {
                col.mapv_inplace(|v| v / s);
                weights[r] *= s;
            }
        }
    }
    Ok(())
}
