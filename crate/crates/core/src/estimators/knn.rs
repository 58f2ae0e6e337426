//! k-nearest-neighbour (Kozachenko-Leonenko) entropy estimator.
//!
//! ```text
//! H = psi(s) - psi(k) + ln V_d + (d/s) sum_i ln rho_{k,i}
//! ```
//!
//! with `rho_{k,i}` the Euclidean distance from sample `i` to its `k`-th nearest
//! other sample and `V_d` the volume of the unit `d`-ball. Neighbour search is
//! exhaustive, parallel over samples, and reduced in sample order.

use std::f64::consts::PI;

use ndarray::ArrayView2;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{PtcError, Result};

/// What to do with a neighbour distance that is (numerically) zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TiePolicy {
    /// Replace distances below the floor with the floor and count them.
    Floor(f64),
    /// Fail on the first zero distance.
    Error,
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::Floor(1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub k: usize,
    pub entropy: f64,
    /// Distances that were raised to the tie floor.
    pub floored: usize,
}

/// `ln V_d` for the Euclidean unit ball.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * PI.ln() - ln_gamma(h + 1.0)
}

/// Entropy estimate with the default tie floor of `1e-12`.
pub fn knn_entropy(samples: ArrayView2<f64>, k: usize) -> Result<f64> {
    let rep = knn_entropy_sweep(samples, &[k], TiePolicy::default())?;
    Ok(rep[0].entropy)
}

/// Estimates for several `k` sharing one neighbour search.
pub fn knn_entropy_sweep(
    samples: ArrayView2<f64>,
    ks: &[usize],
    policy: TiePolicy,
) -> Result<Vec<KnnReport>> {
    let s = samples.nrows();
    let d = samples.ncols();
    if ks.is_empty() {
        return Ok(Vec::new());
    }
    if d == 0 {
        return Err(PtcError::arg("samples have no columns"));
    }
    for &k in ks {
        if k == 0 || k >= s {
            return Err(PtcError::arg(format!("k must satisfy 1 <= k < s = {s}, got {k}")));
        }
    }
    let kmax = *ks.iter().max().unwrap();
    // Row-major copy regardless of the view's strides.
    let data: Vec<f64> = samples.iter().copied().collect();

    // Squared distances to the 1..=kmax nearest neighbours of each sample.
    let neighbours: Vec<Vec<f64>> = (0..s)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(s),
            |buf: &mut Vec<f64>, i| {
                buf.clear();
                let xi = &data[i * d..(i + 1) * d];
                for j in 0..s {
                    if j == i {
                        continue;
                    }
                    let xj = &data[j * d..(j + 1) * d];
                    buf.push(xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum());
                }
                buf.select_nth_unstable_by(kmax - 1, |a, b| a.total_cmp(b));
                let mut near = buf[..kmax].to_vec();
                near.sort_unstable_by(|a, b| a.total_cmp(b));
                near
            },
        )
        .collect();

    let log_vd = log_unit_ball_volume(d);
    let psi_s = digamma(s as f64);
    ks.iter()
        .map(|&k| {
            let mut floored = 0;
            let mut log_sum = 0.0;
            for near in &neighbours {
                let rho = near[k - 1].sqrt();
                let rho = match policy {
                    TiePolicy::Floor(floor) if rho < floor => {
                        floored += 1;
                        floor
                    }
                    TiePolicy::Error if rho == 0.0 => {
                        return Err(PtcError::Numerical {
                            iteration: 0,
                            reason: format!("zero {k}-th neighbour distance (duplicate samples)"),
                        })
                    }
                    _ => rho,
                };
                log_sum += rho.ln();
            }
            if floored > 0 {
                log::warn!("k-NN entropy (k={k}): {floored} neighbour distances raised to the tie floor");
            }
            Ok(KnnReport {
                k,
                entropy: psi_s - digamma(k as f64) + log_vd + d as f64 * log_sum / s as f64,
                floored,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_points_one_dimension() {
        let h = knn_entropy(array![[0.0], [1.0]].view(), 1).unwrap();
        assert!((h - (1.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((log_unit_ball_volume(1) - 2f64.ln()).abs() < 1e-14);
        assert!((log_unit_ball_volume(2) - PI.ln()).abs() < 1e-14);
        assert!((log_unit_ball_volume(3) - (4.0 * PI / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn k_out_of_range() {
        let x = array![[0.0], [1.0]];
        assert!(knn_entropy(x.view(), 2).is_err());
        assert!(knn_entropy(x.view(), 0).is_err());
    }

    #[test]
    fn duplicates_are_floored_or_rejected() {
        let x = array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [2.0, 0.5]];
        let rep = knn_entropy_sweep(x.view(), &[1], TiePolicy::default()).unwrap();
        assert!(rep[0].entropy.is_finite());
        assert_eq!(rep[0].floored, 2);
        assert!(knn_entropy_sweep(x.view(), &[1], TiePolicy::Error).is_err());
    }

    #[test]
    fn sweep_matches_single_calls() {
        let x = array![[0.0, 0.1], [0.4, 1.0], [1.3, 0.2], [2.0, 2.5], [0.7, 0.7]];
        let rep = knn_entropy_sweep(x.view(), &[1, 3], TiePolicy::default()).unwrap();
        assert_eq!(rep[0].entropy, knn_entropy(x.view(), 1).unwrap());
        assert_eq!(rep[1].entropy, knn_entropy(x.view(), 3).unwrap());
    }
}
