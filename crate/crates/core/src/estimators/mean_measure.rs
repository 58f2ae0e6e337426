//! Exact expected bin counts `nu_j = s mu(B_j)` for product distributions.

use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{PtcError, Result};
use crate::histogram::BinningGrid;
use crate::samplers::DistributionSpec;
use crate::tensor::{delinearize_into, Shape};

/// A one-dimensional factor of a product distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    StudentT { dof: f64, loc: f64, scale: f64 },
}

impl Marginal {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Normal { mean, sd } => Normal::new(mean, sd).unwrap().cdf(x),
            Marginal::StudentT { dof, loc, scale } => StudentsT::new(loc, scale, dof).unwrap().cdf(x),
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { .. } => 1.0 - self.cdf(x),
            Marginal::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sf(x),
            Marginal::StudentT { dof, loc, scale } => StudentsT::new(loc, scale, dof).unwrap().sf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Marginal::Normal { mean, sd } => Normal::new(mean, sd).unwrap().pdf(x),
            Marginal::StudentT { dof, loc, scale } => StudentsT::new(loc, scale, dof).unwrap().pdf(x),
        }
    }

    /// Probability of `[a, b]`, using survival differences in the upper tail.
    pub fn interval_probability(&self, a: f64, b: f64) -> f64 {
        if self.cdf(a) > 0.5 {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }
}

/// `nu` over a grid, held as the rank-one product `s prod_k P_k(interval i_k)`.
#[derive(Debug, Clone)]
pub struct MeanMeasure {
    shape: Shape,
    samples: f64,
    probs: Vec<Vec<f64>>,
}

impl MeanMeasure {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Per-dimension interval probabilities.
    pub fn interval_probabilities(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn value(&self, idx: &[usize]) -> Result<f64> {
        self.shape.check_index(idx)?;
        Ok(self.samples
            * idx
                .iter()
                .zip(&self.probs)
                .map(|(&i, p)| p[i])
                .product::<f64>())
    }

    /// `sum_j nu_j = s P(B)`.
    pub fn total(&self) -> f64 {
        self.samples * self.probs.iter().map(|p| p.iter().sum::<f64>()).product::<f64>()
    }

    /// Every `nu_j` in linear-index order.
    pub fn to_dense(&self, budget: u128) -> Result<Vec<f64>> {
        let n = self.shape.len();
        if n as u128 > budget {
            return Err(PtcError::Capacity {
                required: n as u128,
                budget,
            });
        }
        let dims = self.shape.dims();
        let mut idx = vec![0; dims.len()];
        Ok((0..n)
            .map(|l| {
                delinearize_into(l, dims, &mut idx);
                self.samples
                    * idx
                        .iter()
                        .zip(&self.probs)
                        .map(|(&i, p)| p[i])
                        .product::<f64>()
            })
            .collect())
    }
}

/// Expected counts of `s` samples from `dist` in every bin of `grid`.
///
/// Only distributions with independent coordinates are supported.
pub fn true_mean_measure(grid: &BinningGrid, dist: &DistributionSpec, s: usize) -> Result<MeanMeasure> {
    let marginals = dist.marginals().ok_or_else(|| {
        PtcError::arg(format!(
            "{} does not factor into independent marginals",
            dist.family()
        ))
    })?;
    if marginals.len() != grid.ndim() {
        return Err(PtcError::arg(format!(
            "distribution has {} dimensions, grid has {}",
            marginals.len(),
            grid.ndim()
        )));
    }
    let probs = marginals
        .iter()
        .enumerate()
        .map(|(k, m)| {
            grid.edges(k)
                .windows(2)
                .map(|w| m.interval_probability(w[0], w[1]))
                .collect()
        })
        .collect();
    Ok(MeanMeasure {
        shape: grid.shape().clone(),
        samples: s as f64,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quarters() {
        let g = BinningGrid::from_edges(vec![vec![0.0, 0.25, 0.5, 0.75, 1.0]]).unwrap();
        let nu = true_mean_measure(&g, &DistributionSpec::uniform_box(1, 0.0, 1.0), 100).unwrap();
        for i in 0..4 {
            assert!((nu.value(&[i]).unwrap() - 25.0).abs() < 1e-12);
        }
        assert!((nu.total() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn normal_halves() {
        let g = BinningGrid::from_edges(vec![vec![-10.0, 0.0, 10.0]]).unwrap();
        let nu = true_mean_measure(&g, &DistributionSpec::standard_normal(1), 100).unwrap();
        assert!((nu.value(&[0]).unwrap() - 50.0).abs() < 1e-9);
        assert!((nu.value(&[1]).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn correlated_gaussian_unsupported() {
        let g = BinningGrid::from_edges(vec![vec![-1.0, 1.0]; 2]).unwrap();
        let err = true_mean_measure(&g, &DistributionSpec::correlated_normal(2), 10).unwrap_err();
        assert!(matches!(err, PtcError::Argument(_)));
    }
}
