//! Poisson CP fitting by alternating multiplicative (majorization-minimization) updates.
//!
//! Maximizes `sum_i (t_i log m_i - m_i)` over rank-`R` Kruskal models. Each outer
//! iteration sweeps the modes; for mode `k` the weights are absorbed into the factor
//! (`B = A_k diag(lambda)`) and the update
//!
//! ```text
//! Phi = (X_(k) ./ (B Pi^T)) Pi,    B <- B .* Phi
//! ```
//!
//! is repeated up to `max_inner_iters` times, where `Pi` is the Khatri-Rao product of
//! the other factors. Only rows of `Pi` at nonzero entries of the data are formed, and
//! the `- sum_i m_i` term of the likelihood is taken from the weights, so no step ever
//! touches all `n` entries.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PtcError, Result};
use crate::tensor::{delinearize_into, KruskalModel, Shape, SparseCountTensor};

/// Tuning for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub rank: usize,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Stop once the KKT violation of every mode falls below this.
    pub kkt_tol: f64,
    /// Guard added inside logarithms and used as the floor of update denominators.
    pub log_shift: f64,
    pub seed: u64,
    /// Weights that underflow below this are clamped to it.
    pub min_weight: f64,
}

impl FitConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_outer_iters: 200,
            max_inner_iters: 10,
            kkt_tol: 1e-4,
            log_shift: 1e-10,
            seed: 0,
            min_weight: 1e-300,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(PtcError::arg("rank must be at least 1"));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(PtcError::arg("iteration limits must be positive"));
        }
        for (name, v) in [
            ("kkt_tol", self.kkt_tol),
            ("log_shift", self.log_shift),
            ("min_weight", self.min_weight),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PtcError::arg(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: KruskalModel,
    /// Log-likelihood after each outer iteration.
    pub loglik_trace: Vec<f64>,
    pub final_kkt_violation: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Poisson log-likelihood `sum_i (t_i log(m_i + eps) - m_i)` with `eps = 1e-10`,
/// omitting the `log t_i!` constant.
pub fn log_likelihood(model: &KruskalModel, t: &SparseCountTensor) -> Result<f64> {
    log_likelihood_with_shift(model, t, FitConfig::default().log_shift)
}

pub fn log_likelihood_with_shift(
    model: &KruskalModel,
    t: &SparseCountTensor,
    eps: f64,
) -> Result<f64> {
    if model.shape() != t.shape() {
        return Err(PtcError::arg(format!(
            "model shape {:?} does not match data shape {:?}",
            model.shape().dims(),
            t.shape().dims()
        )));
    }
    let dims = t.shape().dims();
    let mut idx = vec![0; dims.len()];
    let mut ll = 0.0;
    for (l, c) in t.iter() {
        delinearize_into(l, dims, &mut idx);
        ll += c as f64 * (model.entry_unchecked(&idx) + eps).ln();
    }
    Ok(ll - model.weight_sum())
}

/// Random starting model: factor entries uniform on (0,1) from a seeded generator,
/// columns normalized, every weight `total_mass / rank`.
pub fn init_model(shape: &Shape, rank: usize, total_mass: f64, seed: u64) -> Result<KruskalModel> {
    if rank == 0 {
        return Err(PtcError::arg("rank must be at least 1"));
    }
    if !(total_mass > 0.0) || !total_mass.is_finite() {
        return Err(PtcError::arg(format!("initial mass must be positive, got {total_mass}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = shape
        .dims()
        .iter()
        .map(|&n| {
            let mut f = Array2::<f64>::zeros((n, rank));
            // Open interval keeps every column strictly positive.
            f.mapv_inplace(|_| rng.random::<f64>().max(f64::MIN_POSITIVE));
            for mut col in f.columns_mut() {
                let s = col.sum();
                col.mapv_inplace(|v| v / s);
            }
            f
        })
        .collect();
    Ok(KruskalModel::from_parts_unchecked(
        shape.clone(),
        vec![total_mass / rank as f64; rank],
        factors,
    ))
}

/// Nonzero coordinates and counts laid out for the update loops.
struct Support {
    nnz: usize,
    ndim: usize,
    coords: Vec<usize>,
    counts: Vec<f64>,
}

impl Support {
    fn new(t: &SparseCountTensor) -> Self {
        let dims = t.shape().dims();
        let ndim = dims.len();
        let mut coords = vec![0; t.nnz() * ndim];
        let mut counts = Vec::with_capacity(t.nnz());
        for (e, (l, c)) in t.iter().enumerate() {
            delinearize_into(l, dims, &mut coords[e * ndim..(e + 1) * ndim]);
            counts.push(c as f64);
        }
        Self {
            nnz: t.nnz(),
            ndim,
            coords,
            counts,
        }
    }

    #[inline]
    fn coord(&self, e: usize, k: usize) -> usize {
        self.coords[e * self.ndim + k]
    }
}

/// Fits a rank-`config.rank` Poisson CP model to `t`.
///
/// The result is a deterministic function of `(t, config)`.
pub fn fit(t: &SparseCountTensor, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if t.is_empty() {
        return Err(PtcError::Fit("cannot fit an empty tensor".into()));
    }
    let rank = config.rank;
    let total = t.total() as f64;
    let mut model = init_model(t.shape(), rank, total, config.seed)?;
    let support = Support::new(t);
    let dims = t.shape().dims().to_vec();
    let eps = config.log_shift;

    let mut pi = vec![0.0; support.nnz * rank];
    let mut trace = Vec::with_capacity(config.max_outer_iters);
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut outer = 0;

    while outer < config.max_outer_iters {
        outer += 1;
        let mut mode_kkt = vec![0.0f64; dims.len()];
        for (k, &nk) in dims.iter().enumerate() {
            khatri_rao_rows(&model, &support, k, &mut pi);
            let (weights, factors) = model.parts_mut();
            let mut b: Vec<f64> = factors[k]
                .indexed_iter()
                .map(|((_, r), &a)| a * weights[r])
                .collect();
            let mut phi = vec![0.0; nk * rank];
            for inner in 0..config.max_inner_iters {
                phi.iter_mut().for_each(|v| *v = 0.0);
                for e in 0..support.nnz {
                    let row = support.coord(e, k) * rank;
                    let p = &pi[e * rank..(e + 1) * rank];
                    let m: f64 = b[row..row + rank].iter().zip(p).map(|(x, y)| x * y).sum();
                    let v = support.counts[e] / m.max(eps);
                    for (f, &pr) in phi[row..row + rank].iter_mut().zip(p) {
                        *f += v * pr;
                    }
                }
                let viol = b
                    .iter()
                    .zip(&phi)
                    .map(|(&bv, &f)| bv.min(1.0 - f).abs())
                    .fold(0.0, f64::max);
                if inner == 0 {
                    mode_kkt[k] = viol;
                }
                if viol < config.kkt_tol {
                    break;
                }
                b.iter_mut().zip(&phi).for_each(|(bv, &f)| *bv *= f);
            }

            let f = &mut factors[k];
            for r in 0..rank {
                let s: f64 = (0..nk).map(|i| b[i * rank + r]).sum();
                if !s.is_finite() {
                    return Err(PtcError::Numerical {
                        iteration: outer,
                        reason: format!("non-finite column sum in mode {k}, component {r}"),
                    });
                }
                if s <= config.min_weight {
                    // Component has vanished; keep a valid stochastic column.
                    weights[r] = config.min_weight;
                    for i in 0..nk {
                        f[[i, r]] = 1.0 / nk as f64;
                    }
                } else {
                    weights[r] = s;
                    for i in 0..nk {
                        f[[i, r]] = b[i * rank + r] / s;
                    }
                }
            }
        }

        let ll = log_likelihood_with_shift(&model, t, eps)?;
        if !ll.is_finite() {
            return Err(PtcError::Numerical {
                iteration: outer,
                reason: format!("log-likelihood is {ll}"),
            });
        }
        trace.push(ll);
        kkt = mode_kkt.iter().copied().fold(0.0, f64::max);
        if kkt < config.kkt_tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        model,
        loglik_trace: trace,
        final_kkt_violation: kkt,
        outer_iterations: outer,
        converged,
    })
}

/// Rows of the Khatri-Rao product of every factor except `skip`, at each nonzero.
fn khatri_rao_rows(model: &KruskalModel, support: &Support, skip: usize, out: &mut [f64]) {
    let rank = model.rank();
    let factors = model.factors();
    for e in 0..support.nnz {
        let row = &mut out[e * rank..(e + 1) * rank];
        row.iter_mut().for_each(|v| *v = 1.0);
        for (j, f) in factors.iter().enumerate() {
            if j == skip {
                continue;
            }
            let i = support.coord(e, j);
            for (r, v) in row.iter_mut().enumerate() {
                *v *= f[[i, r]];
            }
        }
    }
}
