//! Closed-form differential entropies (nats) used as ground truth.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use statrs::function::{beta::ln_beta, gamma::digamma};

use crate::error::{PtcError, Result};

/// `d/2 ln(2 pi e) + 1/2 ln det(Sigma)` with the log-determinant from a Cholesky factor.
pub fn gaussian_entropy(sigma: &DMatrix<f64>) -> Result<f64> {
    let d = sigma.nrows();
    if d == 0 || sigma.ncols() != d {
        return Err(PtcError::arg("covariance must be a non-empty square matrix"));
    }
    let scale = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..d {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(PtcError::arg("covariance is not symmetric"));
            }
        }
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| PtcError::arg("covariance is not positive definite"))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * d as f64 * (2.0 * PI * E).ln() + 0.5 * log_det)
}

/// `sum_i ln(b_i - a_i)` for the uniform distribution on a box.
pub fn uniform_entropy(bounds: &[(f64, f64)]) -> Result<f64> {
    if bounds.is_empty() {
        return Err(PtcError::arg("box has no dimensions"));
    }
    bounds
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            if b > a && (b - a).is_finite() {
                Ok((b - a).ln())
            } else {
                Err(PtcError::arg(format!("empty interval ({a}, {b}) in dimension {i}")))
            }
        })
        .sum()
}

/// Entropy of the one-dimensional Student-t with `dof` degrees of freedom and scale `scale`:
///
/// ```text
/// (nu+1)/2 [psi((nu+1)/2) - psi(nu/2)] + ln(sqrt(nu) B(nu/2, 1/2)) + ln(scale)
/// ```
///
/// This is the standard location-scale t result (Lazo and Rathie, 1978, IEEE Trans.
/// Inf. Theory 24(1)); `dof = 1` gives the Cauchy value `ln(4 pi)`.
pub fn student_t_entropy(dof: f64, scale: f64) -> Result<f64> {
    if !(dof > 0.0) || !(scale > 0.0) {
        return Err(PtcError::arg("degrees of freedom and scale must be positive"));
    }
    let h = (dof + 1.0) / 2.0;
    Ok(h * (digamma(h) - digamma(dof / 2.0)) + 0.5 * dof.ln() + ln_beta(dof / 2.0, 0.5) + scale.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_covariances() {
        let h5 = gaussian_entropy(&DMatrix::identity(5, 5)).unwrap();
        assert!((h5 - 7.094_69).abs() < 1e-5);
        let h1 = gaussian_entropy(&DMatrix::identity(1, 1)).unwrap();
        assert!((h1 - 1.418_94).abs() < 1e-5);
    }

    #[test]
    fn equicorrelated_matches_eigenvalues() {
        // Sigma = (1 1^T + I)/2 has eigenvalue (d+1)/2 once and 1/2 with multiplicity d-1.
        let d = 5;
        let sigma = (DMatrix::from_element(d, d, 1.0) + DMatrix::identity(d, d)) * 0.5;
        let log_det = ((d as f64 + 1.0) / 2.0).ln() + (d as f64 - 1.0) * 0.5f64.ln();
        let expect = 0.5 * d as f64 * (2.0 * PI * E).ln() + 0.5 * log_det;
        assert!((gaussian_entropy(&sigma).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_entropy(&m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(gaussian_entropy(&m).is_err());
    }

    #[test]
    fn uniform_boxes() {
        assert_eq!(uniform_entropy(&[(0.0, 1.0); 5]).unwrap(), 0.0);
        let e2 = 2f64.exp();
        assert!((uniform_entropy(&[(0.0, e2); 5]).unwrap() - 10.0).abs() < 1e-12);
        assert!((uniform_entropy(&[(0.0, 2.0), (0.0, 3.0)]).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!(uniform_entropy(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn cauchy_and_large_dof() {
        assert!((student_t_entropy(1.0, 1.0).unwrap() - (4.0 * PI).ln()).abs() < 1e-12);
        // Approaches the standard normal as dof grows.
        let h = student_t_entropy(1e6, 1.0).unwrap();
        assert!((h - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-5);
    }
}
