//! The PTC density: a fitted Kruskal model normalized into a piecewise-constant
//! density over the bins of a grid, and the plug-in expectations built on it.
//!
//! Nothing here materializes the dense model. Entropy is accumulated by walking
//! the bins in nested loops that carry partial products of the factor rows, so the
//! innermost loop costs `O(R)` per bin; slices along the last mode are summed
//! in parallel and reduced in slice order, which keeps results independent of
//! the thread count.

use rayon::prelude::*;

use crate::error::{PtcError, Result};
use crate::histogram::{BinLocation, BinningGrid};
use crate::tensor::{delinearize_into, kruskal_total_mass, KruskalModel};

/// Default cap on the number of bins (or retained terms) an entropy evaluation may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 100_000_000;

/// `p(x) = m_bin(x) / (||M||_1 |B_bin(x)|)` on the grid's box, zero elsewhere.
#[derive(Debug, Clone)]
pub struct PtcDensity {
    model: KruskalModel,
    grid: BinningGrid,
    total_mass: f64,
}

impl PtcDensity {
    pub fn new(model: KruskalModel, grid: BinningGrid) -> Result<Self> {
        if model.shape() != grid.shape() {
            return Err(PtcError::arg(format!(
                "model shape {:?} does not match grid shape {:?}",
                model.shape().dims(),
                grid.shape().dims()
            )));
        }
        let total_mass = kruskal_total_mass(&model)?;
        if !(total_mass > 0.0) {
            return Err(PtcError::DegenerateModel("model has zero mass".into()));
        }
        Ok(Self {
            model,
            grid,
            total_mass,
        })
    }

    pub fn model(&self) -> &KruskalModel {
        &self.model
    }

    pub fn grid(&self) -> &BinningGrid {
        &self.grid
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Probability of the bin at `idx`.
    pub fn bin_probability(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.model.entry(idx)? / self.total_mass)
    }
}

/// Density value at `x`.
pub fn ptc_density_eval(p: &PtcDensity, x: &[f64]) -> Result<f64> {
    match p.grid.bin_point(x)? {
        BinLocation::Outside => Ok(0.0),
        BinLocation::Inside(idx) => {
            let idx = idx.as_slice();
            Ok(p.model.entry_unchecked(idx) / (p.total_mass * p.grid.volume(idx)))
        }
    }
}

fn check_budget(required: u128, budget: u128) -> Result<()> {
    if required > budget {
        Err(PtcError::Capacity { required, budget })
    } else {
        Ok(())
    }
}

/// `(1/||M||_1) sum_j m_j fbar(B_j)`, where `fbar` gives the bin average of `f`.
///
/// `fbar` is only consulted for bins with positive model mass; returning `None`
/// for such a bin is an error.
pub fn plug_in_expectation<F>(p: &PtcDensity, fbar: F) -> Result<f64>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    let shape = p.grid.shape();
    check_budget(shape.len() as u128, DEFAULT_ENUMERATION_BUDGET)?;
    let dims = shape.dims();
    let mut idx = vec![0; dims.len()];
    let mut acc = 0.0;
    for l in 0..shape.len() {
        delinearize_into(l, dims, &mut idx);
        let m = p.model.entry_unchecked(&idx);
        if m > 0.0 {
            let f = fbar(&idx).ok_or_else(|| {
                PtcError::arg(format!("no bin average supplied for bin {idx:?}"))
            })?;
            acc += m * f;
        }
    }
    Ok(acc / p.total_mass)
}

/// Differential entropy of the PTC density, in nats, by full enumeration of the bins.
pub fn ptc_entropy(p: &PtcDensity) -> Result<f64> {
    ptc_entropy_with_budget(p, DEFAULT_ENUMERATION_BUDGET)
}

/// [`ptc_entropy`] with an explicit cap on the number of bins visited.
pub fn ptc_entropy_with_budget(p: &PtcDensity, budget: u128) -> Result<f64> {
    check_budget(p.grid.shape().len() as u128, budget)?;
    let walker = BoxWalker::new(p);
    let all: Vec<Vec<usize>> = p.grid.shape().dims().iter().map(|&n| (0..n).collect()).collect();
    Ok(-walker.sum_full(&all))
}

/// Outcome of a thresholded entropy evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub tau: f64,
    /// Number of (component, bin) terms evaluated: `sum_r prod_k |kept_{r,k}|`.
    pub retained_terms: u128,
    /// `R n`.
    pub total_terms: u128,
    /// First-order count `R n - sum_r sum_k |pruned_{r,k}| n / n_k`, which double
    /// counts bins pruned in several modes; kept for comparison with `retained_terms`.
    pub first_order_retained_terms: i128,
    /// Distinct bins visited.
    pub retained_bins: u128,
    pub retained_mass_fraction: f64,
    pub entropy_estimate: f64,
    /// Every component lost all of its indices along some mode.
    pub pruned_everything: bool,
}

/// Entropy restricted to the bins kept after dropping, per component, every factor
/// index whose entry is below `tau`.
///
/// For component `r` the kept bins form the box `prod_k {i : a_r^(k)[i] >= tau}`.
/// A bin's retained mass sums every component whose box contains it, and the
/// entropy terms are evaluated on those merged values with the full model mass
/// as normalizer. With nothing pruned this is exactly [`ptc_entropy`].
pub fn ptc_entropy_thresholded(p: &PtcDensity, tau: f64) -> Result<ThresholdReport> {
    ptc_entropy_thresholded_with_budget(p, tau, DEFAULT_ENUMERATION_BUDGET)
}

pub fn ptc_entropy_thresholded_with_budget(
    p: &PtcDensity,
    tau: f64,
    budget: u128,
) -> Result<ThresholdReport> {
    if !(0.0..1.0).contains(&tau) {
        return Err(PtcError::arg(format!("threshold must lie in [0, 1), got {tau}")));
    }
    let model = &p.model;
    let rank = model.rank();
    let dims = model.shape().dims();
    let n = model.shape().len() as u128;

    // kept[r][k] = indices of a_r^(k) at or above tau.
    let kept: Vec<Vec<Vec<usize>>> = (0..rank)
        .map(|r| {
            model
                .factors()
                .iter()
                .map(|f| (0..f.nrows()).filter(|&i| f[[i, r]] >= tau).collect())
                .collect()
        })
        .collect();

    let retained_terms: u128 = kept
        .iter()
        .map(|ks| ks.iter().map(|s| s.len() as u128).product::<u128>())
        .sum();
    let first_order_retained_terms = rank as i128 * n as i128
        - kept
            .iter()
            .flat_map(|ks| {
                ks.iter()
                    .zip(dims)
                    .map(|(s, &nk)| (nk - s.len()) as i128 * (n / nk as u128) as i128)
            })
            .sum::<i128>();
    let retained_mass: f64 = kept
        .iter()
        .enumerate()
        .map(|(r, ks)| {
            model.weights()[r]
                * ks.iter()
                    .zip(model.factors())
                    .map(|(s, f)| s.iter().map(|&i| f[[i, r]]).sum::<f64>())
                    .product::<f64>()
        })
        .sum();
    let base = ThresholdReport {
        tau,
        retained_terms,
        total_terms: rank as u128 * n,
        first_order_retained_terms,
        retained_bins: 0,
        retained_mass_fraction: retained_mass / p.total_mass,
        entropy_estimate: 0.0,
        pruned_everything: retained_terms == 0,
    };

    if retained_terms == 0 {
        return Ok(ThresholdReport {
            retained_mass_fraction: 0.0,
            ..base
        });
    }
    let nothing_pruned = kept
        .iter()
        .all(|ks| ks.iter().zip(dims).all(|(s, &nk)| s.len() == nk));
    if nothing_pruned {
        check_budget(n, budget)?;
        let walker = BoxWalker::new(p);
        let all: Vec<Vec<usize>> = dims.iter().map(|&nk| (0..nk).collect()).collect();
        return Ok(ThresholdReport {
            retained_bins: n,
            retained_mass_fraction: 1.0,
            entropy_estimate: -walker.sum_full(&all),
            ..base
        });
    }
    if rank > 64 {
        return Err(PtcError::arg("thresholded enumeration supports at most 64 components"));
    }
    check_budget(retained_terms, budget)?;

    // membership[k][i] = bitmask of components keeping index i along mode k.
    let membership: Vec<Vec<u64>> = dims
        .iter()
        .enumerate()
        .map(|(k, &nk)| {
            let mut m = vec![0u64; nk];
            for (r, ks) in kept.iter().enumerate() {
                for &i in &ks[k] {
                    m[i] |= 1 << r;
                }
            }
            m
        })
        .collect();

    let walker = BoxWalker::new(p);
    let mut sum = 0.0;
    let mut bins = 0u128;
    for (r, ks) in kept.iter().enumerate() {
        if ks.iter().any(|s| s.is_empty()) {
            continue;
        }
        let (s, b) = walker.sum_masked(ks, &membership, r);
        sum += s;
        bins += b;
    }
    Ok(ThresholdReport {
        retained_bins: bins,
        entropy_estimate: -sum,
        ..base
    })
}

/// Nested-loop accumulator of `sum_j p_j (ln p_j - ln |B_j|)` over boxes of bins.
struct BoxWalker<'a> {
    rank: usize,
    dims: Vec<usize>,
    /// Factor rows, row-major `n_k x R`; mode 0 pre-scaled by `lambda_r / ||M||_1`.
    rows: Vec<Vec<f64>>,
    log_widths: Vec<&'a [f64]>,
}

impl<'a> BoxWalker<'a> {
    fn new(p: &'a PtcDensity) -> Self {
        let model = &p.model;
        let rank = model.rank();
        let rows = model
            .factors()
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.indexed_iter()
                    .map(|((_, r), &a)| {
                        if k == 0 {
                            a * model.weights()[r] / p.total_mass
                        } else {
                            a
                        }
                    })
                    .collect()
            })
            .collect();
        let log_widths = (0..model.shape().ndim()).map(|k| p.grid.log_widths(k)).collect();
        Self {
            rank,
            dims: model.shape().dims().to_vec(),
            rows,
            log_widths,
        }
    }

    fn row(&self, k: usize, i: usize) -> &[f64] {
        &self.rows[k][i * self.rank..(i + 1) * self.rank]
    }

    /// Sum over the full Cartesian product of `sets`.
    fn sum_full(&self, sets: &[Vec<usize>]) -> f64 {
        let d = self.dims.len();
        let top = d - 1;
        if d == 1 {
            let ones = vec![1.0; self.rank];
            return self.leaf_full(&sets[0], &ones, 0.0);
        }
        let partials: Vec<f64> = sets[top]
            .par_iter()
            .map(|&i| {
                let mut buf = vec![0.0; d * self.rank];
                buf[top * self.rank..].copy_from_slice(self.row(top, i));
                self.descend_full(sets, top - 1, &mut buf, self.log_widths[top][i])
            })
            .collect();
        partials.iter().sum()
    }

    fn descend_full(&self, sets: &[Vec<usize>], level: usize, buf: &mut [f64], lv: f64) -> f64 {
        let rank = self.rank;
        if level == 0 {
            let parent = &buf[rank..2 * rank];
            return self.leaf_full(&sets[0], parent, lv);
        }
        let mut acc = 0.0;
        for &i in &sets[level] {
            let row = self.row(level, i);
            let (lo, hi) = buf.split_at_mut((level + 1) * rank);
            let cur = &mut lo[level * rank..];
            let parent = &hi[..rank];
            let mut any = false;
            for ((c, &pv), &a) in cur.iter_mut().zip(parent).zip(row) {
                *c = pv * a;
                any |= *c > 0.0;
            }
            if any {
                acc += self.descend_full(sets, level - 1, buf, lv + self.log_widths[level][i]);
            }
        }
        acc
    }

    #[inline]
    fn leaf_full(&self, set0: &[usize], parent: &[f64], lv: f64) -> f64 {
        let lw0 = self.log_widths[0];
        let mut acc = 0.0;
        for &i in set0 {
            let row = self.row(0, i);
            let m: f64 = parent.iter().zip(row).map(|(a, b)| a * b).sum();
            if m > 0.0 {
                acc += m * (m.ln() - lv - lw0[i]);
            }
        }
        acc
    }

    /// Sum over the box of component `owner`, skipping bins already covered by a
    /// lower-numbered component's box and merging the mass of every component
    /// whose box contains the bin. Returns the sum and the number of bins visited.
    fn sum_masked(&self, sets: &[Vec<usize>], membership: &[Vec<u64>], owner: usize) -> (f64, u128) {
        let d = self.dims.len();
        let mut buf = vec![0.0; (d + 1) * self.rank];
        buf[d * self.rank..].iter_mut().for_each(|v| *v = 1.0);
        let mut bins = 0;
        let s = self.descend_masked(sets, membership, owner, d - 1, &mut buf, u64::MAX, 0.0, &mut bins);
        (s, bins)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend_masked(
        &self,
        sets: &[Vec<usize>],
        membership: &[Vec<u64>],
        owner: usize,
        level: usize,
        buf: &mut [f64],
        mask: u64,
        lv: f64,
        bins: &mut u128,
    ) -> f64 {
        let rank = self.rank;
        let earlier = (1u64 << owner) - 1;
        let mut acc = 0.0;
        for &i in &sets[level] {
            let m_mask = mask & membership[level][i];
            let row = self.row(level, i);
            let (lo, hi) = buf.split_at_mut((level + 1) * rank);
            let cur = &mut lo[level * rank..];
            let parent = &hi[..rank];
            for ((c, &pv), &a) in cur.iter_mut().zip(parent).zip(row) {
                *c = pv * a;
            }
            let lvi = lv + self.log_widths[level][i];
            if level == 0 {
                if m_mask & earlier != 0 {
                    continue;
                }
                *bins += 1;
                let m: f64 = (0..rank)
                    .filter(|&r| m_mask >> r & 1 == 1)
                    .map(|r| cur[r])
                    .sum();
                if m > 0.0 {
                    acc += m * (m.ln() - lvi);
                }
            } else {
                acc += self.descend_masked(sets, membership, owner, level - 1, buf, m_mask, lvi, bins);
            }
        }
        acc
    }
}
