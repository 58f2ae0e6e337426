//! Seeded samplers and ground-truth descriptors for the benchmark distributions.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};

use crate::error::{PtcError, Result};
use crate::estimators::closed_form::{gaussian_entropy, student_t_entropy, uniform_entropy};
use crate::estimators::mean_measure::Marginal;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// Uniform on the box `prod_k [a_k, b_k]`.
    Uniform { bounds: Vec<(f64, f64)> },
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    /// Independent standard t coordinates (`dof = 1` is Cauchy).
    StudentT { dof: f64, dim: usize },
    GaussianMixture { components: Vec<MixtureComponent> },
}

/// Entropy of a distribution when a closed form exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrueEntropy {
    Known(f64),
    Unavailable,
}

impl TrueEntropy {
    pub fn value(self) -> Option<f64> {
        match self {
            TrueEntropy::Known(h) => Some(h),
            TrueEntropy::Unavailable => None,
        }
    }
}

impl DistributionSpec {
    pub fn uniform_box(d: usize, a: f64, b: f64) -> Self {
        DistributionSpec::Uniform { bounds: vec![(a, b); d] }
    }

    pub fn standard_normal(d: usize) -> Self {
        DistributionSpec::Gaussian {
            mean: DVector::zeros(d),
            cov: DMatrix::identity(d, d),
        }
    }

    /// Zero-mean normal with unit variances and all correlations 1/2, `(1 1^T + I)/2`.
    pub fn correlated_normal(d: usize) -> Self {
        DistributionSpec::Gaussian {
            mean: DVector::zeros(d),
            cov: (DMatrix::from_element(d, d, 1.0) + DMatrix::identity(d, d)) * 0.5,
        }
    }

    pub fn student_t(dof: f64, d: usize) -> Self {
        DistributionSpec::StudentT { dof, dim: d }
    }

    pub fn cauchy(d: usize) -> Self {
        Self::student_t(1.0, d)
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::Gaussian { .. } => "gaussian",
            DistributionSpec::StudentT { .. } => "student_t",
            DistributionSpec::GaussianMixture { .. } => "gaussian_mixture",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Uniform { bounds } => bounds.len(),
            DistributionSpec::Gaussian { mean, .. } => mean.len(),
            DistributionSpec::StudentT { dim, .. } => *dim,
            DistributionSpec::GaussianMixture { components } => {
                components.first().map_or(0, |c| c.mean.len())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(PtcError::arg("distribution has no dimensions"));
        }
        match self {
            DistributionSpec::Uniform { bounds } => uniform_entropy(bounds).map(|_| ()),
            DistributionSpec::Gaussian { mean, cov } => check_gaussian(mean, cov, d),
            DistributionSpec::StudentT { dof, .. } => {
                if dof.is_finite() && *dof > 0.0 {
                    Ok(())
                } else {
                    Err(PtcError::arg(format!("degrees of freedom must be positive, got {dof}")))
                }
            }
            DistributionSpec::GaussianMixture { components } => {
                let mut total = 0.0;
                for c in components {
                    if !(c.weight > 0.0) {
                        return Err(PtcError::arg("mixture weights must be positive"));
                    }
                    total += c.weight;
                    check_gaussian(&c.mean, &c.cov, d)?;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(PtcError::arg(format!("mixture weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Coordinate marginals when the coordinates are independent.
    pub fn marginals(&self) -> Option<Vec<Marginal>> {
        match self {
            DistributionSpec::Uniform { bounds } => Some(
                bounds
                    .iter()
                    .map(|&(lo, hi)| Marginal::Uniform { lo, hi })
                    .collect(),
            ),
            DistributionSpec::Gaussian { mean, cov } => {
                let d = mean.len();
                let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)] == 0.0));
                diagonal.then(|| {
                    (0..d)
                        .map(|i| Marginal::Normal {
                            mean: mean[i],
                            sd: cov[(i, i)].sqrt(),
                        })
                        .collect()
                })
            }
            DistributionSpec::StudentT { dof, dim } => Some(vec![
                Marginal::StudentT {
                    dof: *dof,
                    loc: 0.0,
                    scale: 1.0,
                };
                *dim
            ]),
            DistributionSpec::GaussianMixture { .. } => None,
        }
    }

    /// Parses `uniform[:a:b]`, `normal`, `normal-corr`, `student-t:nu`, `cauchy`, or
    /// `mixture:m[:separation]`, all in dimension `d`.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| PtcError::arg(format!("'{text}' is missing parameter {i}")))?
                .parse::<f64>()
                .map_err(|e| PtcError::arg(format!("'{text}': {e}")))
        };
        let spec = match parts[0] {
            "uniform" if parts.len() == 1 => Self::uniform_box(d, 0.0, 1.0),
            "uniform" => Self::uniform_box(d, num(1)?, num(2)?),
            "normal" | "gaussian" => Self::standard_normal(d),
            "normal-corr" | "gaussian-corr" => Self::correlated_normal(d),
            "student-t" | "t" => Self::student_t(num(1)?, d),
            "cauchy" => Self::cauchy(d),
            "mixture" => {
                let m = num(1)?;
                if m.fract() != 0.0 || m < 1.0 {
                    return Err(PtcError::arg(format!("'{text}': component count must be a positive integer")));
                }
                let sep = if parts.len() > 2 { num(2)? } else { 10.0 };
                equidistant_mixture(m as usize, d, sep, None)?
            }
            other => return Err(PtcError::arg(format!("unknown distribution '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Uniform { bounds } => write!(f, "uniform(d={})", bounds.len()),
            DistributionSpec::Gaussian { mean, .. } => write!(f, "gaussian(d={})", mean.len()),
            DistributionSpec::StudentT { dof, dim } => write!(f, "student_t(dof={dof}, d={dim})"),
            DistributionSpec::GaussianMixture { components } => {
                write!(f, "gaussian_mixture(m={}, d={})", components.len(), self.dim())
            }
        }
    }
}

fn check_gaussian(mean: &DVector<f64>, cov: &DMatrix<f64>, d: usize) -> Result<()> {
    if mean.len() != d || cov.nrows() != d || cov.ncols() != d {
        return Err(PtcError::arg(format!("gaussian parameters do not match dimension {d}")));
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(PtcError::arg("gaussian mean is not finite"));
    }
    gaussian_entropy(cov).map(|_| ())
}

fn cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| PtcError::arg("covariance is not positive definite"))
}

fn gaussian_into(rng: &mut ChaCha8Rng, mean: &DVector<f64>, l: &DMatrix<f64>, z: &mut [f64], row: &mut [f64]) {
    let d = mean.len();
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for i in 0..d {
        let mut acc = mean[i];
        for j in 0..=i {
            acc += l[(i, j)] * z[j];
        }
        row[i] = acc;
    }
}

/// Draws `s` rows from `spec` using a ChaCha8 stream seeded with `seed`.
pub fn sample(spec: &DistributionSpec, s: usize, seed: u64) -> Result<Array2<f64>> {
    if s == 0 {
        return Err(PtcError::arg("sample size must be at least 1"));
    }
    spec.validate()?;
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::<f64>::zeros((s, d));
    let mut z = vec![0.0; d];
    match spec {
        DistributionSpec::Uniform { bounds } => {
            for mut row in out.rows_mut() {
                for (x, &(a, b)) in row.iter_mut().zip(bounds) {
                    *x = a + (b - a) * rng.random::<f64>();
                }
            }
        }
        DistributionSpec::Gaussian { mean, cov } => {
            let l = cholesky(cov)?;
            for mut row in out.rows_mut() {
                gaussian_into(&mut rng, mean, &l, &mut z, row.as_slice_mut().unwrap());
            }
        }
        DistributionSpec::StudentT { dof, .. } => {
            let t = StudentT::new(*dof).map_err(|e| PtcError::arg(e.to_string()))?;
            for x in out.iter_mut() {
                *x = t.sample(&mut rng);
            }
        }
        DistributionSpec::GaussianMixture { components } => {
            let labels = WeightedIndex::new(components.iter().map(|c| c.weight))
                .map_err(|e| PtcError::arg(e.to_string()))?;
            let factors = components
                .iter()
                .map(|c| cholesky(&c.cov))
                .collect::<Result<Vec<_>>>()?;
            for mut row in out.rows_mut() {
                let c = labels.sample(&mut rng);
                gaussian_into(&mut rng, &components[c].mean, &factors[c], &mut z, row.as_slice_mut().unwrap());
            }
        }
    }
    Ok(out)
}

/// Vertices of a regular simplex with `m` vertices and edge `separation` in `R^d`.
///
/// Vertex 0 is the origin. Vertex `j` sits above the centroid of vertices
/// `0..j` along coordinate axis `j-1`, at the height that makes every edge equal
/// `separation`. Coordinates `m-1..d` are zero.
pub fn simplex_vertices(m: usize, d: usize, separation: f64) -> Result<Vec<DVector<f64>>> {
    if m == 0 {
        return Err(PtcError::arg("simplex needs at least one vertex"));
    }
    if d + 1 < m {
        return Err(PtcError::arg(format!(
            "{m} equidistant points need dimension at least {}, got {d}: \
             at most d+1 points can be mutually equidistant in R^d",
            m - 1
        )));
    }
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(PtcError::arg(format!("separation must be positive, got {separation}")));
    }
    let mut verts: Vec<DVector<f64>> = vec![DVector::zeros(d)];
    for j in 1..m {
        let centroid = verts.iter().fold(DVector::zeros(d), |acc, v| acc + v) / j as f64;
        // Circumradius of a regular simplex with j vertices and unit edge.
        let r2 = (j as f64 - 1.0) / (2.0 * j as f64);
        let mut v = centroid;
        v[j - 1] = separation * (1.0 - r2).sqrt();
        verts.push(v);
    }
    Ok(verts)
}

/// Equal-weight Gaussian mixture with means on a regular simplex.
///
/// Components share `component_cov`, which defaults to the identity.
pub fn equidistant_mixture(
    m: usize,
    d: usize,
    separation: f64,
    component_cov: Option<DMatrix<f64>>,
) -> Result<DistributionSpec> {
    let means = simplex_vertices(m, d, separation)?;
    let cov = component_cov.unwrap_or_else(|| DMatrix::identity(d, d));
    let spec = DistributionSpec::GaussianMixture {
        components: means
            .into_iter()
            .map(|mean| MixtureComponent {
                weight: 1.0 / m as f64,
                mean,
                cov: cov.clone(),
            })
            .collect(),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn true_entropy(spec: &DistributionSpec) -> TrueEntropy {
    let h = match spec {
        DistributionSpec::Uniform { bounds } => uniform_entropy(bounds),
        DistributionSpec::Gaussian { cov, .. } => gaussian_entropy(cov),
        DistributionSpec::StudentT { dof, dim } => student_t_entropy(*dof, 1.0).map(|h| h * *dim as f64),
        DistributionSpec::GaussianMixture { components } if components.len() == 1 => {
            gaussian_entropy(&components[0].cov)
        }
        DistributionSpec::GaussianMixture { .. } => return TrueEntropy::Unavailable,
    };
    h.map_or(TrueEntropy::Unavailable, TrueEntropy::Known)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_support_and_determinism() {
        let spec = DistributionSpec::uniform_box(2, 0.0, 1.0);
        let a = sample(&spec, 500, 3).unwrap();
        assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(a, sample(&spec, 500, 3).unwrap());
        assert_ne!(a, sample(&spec, 500, 4).unwrap());
    }

    #[test]
    fn two_vertex_simplex() {
        let v = simplex_vertices(2, 1, 10.0).unwrap();
        assert_eq!(v[0][0], 0.0);
        assert!((v[1][0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_components() {
        let err = equidistant_mixture(5, 3, 10.0, None).unwrap_err();
        assert!(err.to_string().contains("d+1"));
    }

    #[test]
    fn closed_form_truths() {
        let e2 = 2f64.exp();
        assert_eq!(
            true_entropy(&DistributionSpec::uniform_box(5, 0.0, e2)).value().map(|h| (h - 10.0).abs() < 1e-12),
            Some(true)
        );
        let h = true_entropy(&DistributionSpec::standard_normal(5)).value().unwrap();
        assert!((h - 7.094_69).abs() < 1e-5);
        let mix = equidistant_mixture(3, 3, 10.0, None).unwrap();
        assert_eq!(true_entropy(&mix), TrueEntropy::Unavailable);
    }

    #[test]
    fn parse_names() {
        assert_eq!(DistributionSpec::parse("cauchy", 5).unwrap(), DistributionSpec::cauchy(5));
        assert_eq!(
            DistributionSpec::parse("uniform:0:2", 2).unwrap(),
            DistributionSpec::uniform_box(2, 0.0, 2.0)
        );
        assert_eq!(DistributionSpec::parse("mixture:3", 3).unwrap().family(), "gaussian_mixture");
        assert!(DistributionSpec::parse("student-t", 2).is_err());
        assert!(DistributionSpec::parse("mixture:4", 2).is_err());
        assert!(DistributionSpec::parse("lognormal", 2).is_err());
    }

    #[test]
    fn bad_specs_rejected() {
        let bad = DistributionSpec::Gaussian {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(3, 3),
        };
        assert!(sample(&bad, 10, 0).is_err());
        assert!(sample(&DistributionSpec::standard_normal(2), 0, 0).is_err());
    }
}
