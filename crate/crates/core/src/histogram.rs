//! Binning grids, histogram tensors and the raw histogram entropy baseline.
//!
//! A [`BinningGrid`] partitions the box `B = prod_i [e_i[0], e_i[n_i]]` into
//! half-open bins; the last bin along every axis is closed on the right so a
//! sample sitting exactly on the upper extreme is still binned. Samples outside
//! `B` are counted separately and excluded from every estimator.

use std::fmt;

use ndarray::ArrayView2;

use crate::error::{PtcError, Result};
use crate::tensor::{linearize_unchecked, MultiIndex, Shape, SparseCountTensor};

/// Per-dimension bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningGrid {
    edges: Vec<Vec<f64>>,
    log_widths: Vec<Vec<f64>>,
    shape: Shape,
}

/// Result of locating a point on a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinLocation {
    Inside(MultiIndex),
    Outside,
}

impl BinningGrid {
    /// Builds a grid from explicit, strictly increasing edge sequences.
    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(PtcError::arg("grid needs at least one dimension"));
        }
        let mut log_widths = Vec::with_capacity(edges.len());
        for (dim, e) in edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(PtcError::Grid {
                    dim,
                    reason: "fewer than two edges".into(),
                });
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(PtcError::Grid {
                    dim,
                    reason: "non-finite edge".into(),
                });
            }
            let mut lw = Vec::with_capacity(e.len() - 1);
            for w in e.windows(2) {
                if w[1] <= w[0] {
                    return Err(PtcError::Grid {
                        dim,
                        reason: format!("edges not strictly increasing at {} -> {}", w[0], w[1]),
                    });
                }
                lw.push((w[1] - w[0]).ln());
            }
            log_widths.push(lw);
        }
        let shape = Shape::new(edges.iter().map(|e| e.len() - 1).collect())?;
        Ok(Self {
            edges,
            log_widths,
            shape,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, dim: usize) -> &[f64] {
        &self.edges[dim]
    }

    /// `ln` of the bin widths along `dim`.
    pub fn log_widths(&self, dim: usize) -> &[f64] {
        &self.log_widths[dim]
    }

    /// Lower and upper corner of the box covered by the grid.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.edges
            .iter()
            .map(|e| (e[0], e[e.len() - 1]))
            .collect()
    }

    /// `ln |B_j|` for the bin at `idx`.
    pub fn log_volume(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .zip(&self.log_widths)
            .map(|(&i, lw)| lw[i])
            .sum()
    }

    /// `|B_j|` for the bin at `idx`.
    pub fn volume(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .zip(&self.edges)
            .map(|(&i, e)| e[i + 1] - e[i])
            .product()
    }

    /// Locates `x`, or reports it as outside the box.
    pub fn bin_point(&self, x: &[f64]) -> Result<BinLocation> {
        if x.len() != self.ndim() {
            return Err(PtcError::arg(format!(
                "point has {} coordinates, grid has {}",
                x.len(),
                self.ndim()
            )));
        }
        let mut idx = vec![0; x.len()];
        Ok(if self.locate_into(x, &mut idx) {
            BinLocation::Inside(MultiIndex(idx))
        } else {
            BinLocation::Outside
        })
    }

    #[inline]
    fn locate_into(&self, x: &[f64], out: &mut [usize]) -> bool {
        for ((o, &v), e) in out.iter_mut().zip(x).zip(&self.edges) {
            let last = e.len() - 1;
            // NaN fails both comparisons and lands outside.
            if !(v >= e[0] && v <= e[last]) {
                return false;
            }
            *o = if v == e[last] {
                last - 1
            } else {
                e.partition_point(|&edge| edge <= v) - 1
            };
        }
        true
    }
}

/// Per-dimension sample extrema; rejects non-finite values and flat dimensions.
fn extrema(samples: ArrayView2<f64>) -> Result<Vec<(f64, f64)>> {
    if samples.nrows() < 2 {
        return Err(PtcError::arg("at least two samples are needed to build a grid"));
    }
    if samples.ncols() == 0 {
        return Err(PtcError::arg("samples have no columns"));
    }
    samples
        .columns()
        .into_iter()
        .enumerate()
        .map(|(dim, col)| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in col {
                if !v.is_finite() {
                    return Err(PtcError::Grid {
                        dim,
                        reason: "non-finite sample value".into(),
                    });
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo >= hi {
                return Err(PtcError::Grid {
                    dim,
                    reason: format!("degenerate dimension: all samples equal {lo}"),
                });
            }
            Ok((lo, hi))
        })
        .collect()
}

/// Equal-width grid spanning the sample extrema with `bins_per_dim[i]` bins along axis `i`.
pub fn grid_from_samples(samples: ArrayView2<f64>, bins_per_dim: &[usize]) -> Result<BinningGrid> {
    let ext = extrema(samples)?;
    if bins_per_dim.len() != ext.len() {
        return Err(PtcError::arg(format!(
            "{} bin counts for {} dimensions",
            bins_per_dim.len(),
            ext.len()
        )));
    }
    let edges = ext
        .iter()
        .zip(bins_per_dim)
        .enumerate()
        .map(|(dim, (&(lo, hi), &n))| {
            if n == 0 {
                return Err(PtcError::Grid {
                    dim,
                    reason: "zero bins requested".into(),
                });
            }
            let step = (hi - lo) / n as f64;
            let mut e: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            e.push(hi);
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    BinningGrid::from_edges(edges)
}

/// Bin width `c * s^(-1/(d+2))`, the Gaussian reference rule (`c = 3.5` by default).
pub fn scott_width(s: usize, d: usize, c: f64) -> f64 {
    c * (s as f64).powf(-1.0 / (d as f64 + 2.0))
}

/// Grid of consecutive `width`-wide bins starting at each dimension's minimum and
/// extending until the maximum is covered.
pub fn grid_from_width(samples: ArrayView2<f64>, width: f64) -> Result<BinningGrid> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(PtcError::arg(format!("bin width must be positive, got {width}")));
    }
    let ext = extrema(samples)?;
    let edges = ext
        .iter()
        .enumerate()
        .map(|(dim, &(lo, hi))| {
            let mut n = ((hi - lo) / width).ceil().max(1.0);
            if n > u32::MAX as f64 {
                return Err(PtcError::Grid {
                    dim,
                    reason: format!("width {width} gives too many bins"),
                });
            }
            while lo + n * width < hi {
                n += 1.0;
            }
            Ok((0..=n as usize).map(|i| lo + width * i as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    BinningGrid::from_edges(edges)
}

/// How a grid is derived from a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    /// Fixed number of equal-width bins per dimension.
    BinsPerDim(usize),
    /// Width `c * s^(-1/(d+2))` in every dimension.
    ScottRule { c: f64 },
    /// Fixed width in every dimension.
    Width(f64),
}

impl Binning {
    pub fn grid_for(&self, samples: ArrayView2<f64>) -> Result<BinningGrid> {
        match *self {
            Binning::BinsPerDim(n) => grid_from_samples(samples, &vec![n; samples.ncols()]),
            Binning::ScottRule { c } => {
                if !(c > 0.0) {
                    return Err(PtcError::arg(format!("width constant must be positive, got {c}")));
                }
                grid_from_width(samples, scott_width(samples.nrows(), samples.ncols(), c))
            }
            Binning::Width(w) => grid_from_width(samples, w),
        }
    }

    /// Short name of the quantity that parameterizes this binning.
    pub fn param_name(&self) -> &'static str {
        match self {
            Binning::BinsPerDim(_) => "bins",
            Binning::ScottRule { .. } => "c",
            Binning::Width(_) => "width",
        }
    }

    pub fn param_value(&self) -> f64 {
        match *self {
            Binning::BinsPerDim(n) => n as f64,
            Binning::ScottRule { c } => c,
            Binning::Width(w) => w,
        }
    }
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binning::BinsPerDim(n) => write!(f, "bins:{n}"),
            Binning::ScottRule { c } => write!(f, "c:{c}"),
            Binning::Width(w) => write!(f, "width:{w}"),
        }
    }
}

impl std::str::FromStr for Binning {
    type Err = PtcError;

    /// Parses `bins:20`, `c:3.5` or `width:0.4`; a bare integer means bins per dimension.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || PtcError::arg(format!("cannot parse binning '{s}'"));
        let (kind, val) = match s.split_once(':') {
            Some(kv) => kv,
            None => ("bins", s),
        };
        match kind {
            "bins" => val.parse().map(Binning::BinsPerDim).map_err(|_| bad()),
            "c" => val.parse().map(|c| Binning::ScottRule { c }).map_err(|_| bad()),
            "width" => val.parse().map(Binning::Width).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// A normalized frequency histogram on a grid.
#[derive(Debug, Clone)]
pub struct HistogramDensity {
    grid: BinningGrid,
    counts: SparseCountTensor,
    total: usize,
    outside: usize,
}

impl HistogramDensity {
    pub fn grid(&self) -> &BinningGrid {
        &self.grid
    }

    pub fn counts(&self) -> &SparseCountTensor {
        &self.counts
    }

    /// Number of samples offered, including those outside the box.
    pub fn total_samples(&self) -> usize {
        self.total
    }

    pub fn outside(&self) -> usize {
        self.outside
    }

    pub fn binned(&self) -> usize {
        self.total - self.outside
    }

    /// `c_j / (s |B_j|)` for the bin containing `x`, zero off the box.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        match self.grid.bin_point(x)? {
            BinLocation::Outside => Ok(0.0),
            BinLocation::Inside(idx) => {
                let c = self.counts.get(idx.as_slice())?;
                Ok(c as f64 / (self.total as f64 * self.grid.volume(idx.as_slice())))
            }
        }
    }
}

/// Bins every row of `samples` on `grid`.
pub fn build_histogram(samples: ArrayView2<f64>, grid: &BinningGrid) -> Result<HistogramDensity> {
    if samples.ncols() != grid.ndim() {
        return Err(PtcError::arg(format!(
            "samples have {} columns, grid has {} dimensions",
            samples.ncols(),
            grid.ndim()
        )));
    }
    let dims = grid.shape().dims().to_vec();
    let mut counts = SparseCountTensor::new(grid.shape().clone());
    let mut outside = 0;
    let mut idx = vec![0; dims.len()];
    let mut row = vec![0.0; dims.len()];
    for sample in samples.rows() {
        for (r, &v) in row.iter_mut().zip(sample.iter()) {
            *r = v;
        }
        if grid.locate_into(&row, &mut idx) {
            counts.add_linear(linearize_unchecked(&idx, &dims), 1);
        } else {
            outside += 1;
        }
    }
    Ok(HistogramDensity {
        grid: grid.clone(),
        counts,
        total: samples.nrows(),
        outside,
    })
}

/// Plug-in entropy of the histogram density, in nats.
///
/// Normalizes by the number of binned samples; samples outside the box are
/// excluded from both sums. Empty bins contribute nothing.
pub fn histogram_entropy(h: &HistogramDensity) -> f64 {
    let s = h.binned() as f64;
    if s == 0.0 {
        return 0.0;
    }
    let dims = h.grid.shape().dims();
    let mut idx = vec![0; dims.len()];
    let mut info = 0.0;
    let mut vol = 0.0;
    for (l, c) in h.counts.iter() {
        crate::tensor::delinearize_into(l, dims, &mut idx);
        let p = c as f64 / s;
        info -= p * p.ln();
        vol += p * h.grid.log_volume(&idx);
    }
    info + vol
}

/// Fraction of bins with a nonzero count.
pub fn occupancy(h: &HistogramDensity) -> f64 {
    h.counts.nnz() as f64 / h.grid.shape().len() as f64
}
