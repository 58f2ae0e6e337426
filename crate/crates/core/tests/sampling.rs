//! Sampler moments, mixture geometry and label frequencies.

use nalgebra::{DMatrix, DVector};
use ptc_core::samplers::{simplex_vertices, MixtureComponent};
use ptc_core::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn gaussian_moments_converge() {
    let s = 100_000;
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let spec = DistributionSpec::Gaussian {
        mean: DVector::zeros(2),
        cov,
    };
    let x = sample(&spec, s, 42).unwrap();
    let tol = 5.0 / (s as f64).sqrt();
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    for k in 0..2 {
        assert!(mean[k].abs() < tol);
    }
    for a in 0..2 {
        for b in 0..2 {
            let c: f64 = x.rows().into_iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (s - 1) as f64;
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((c - target).abs() < tol, "cov[{a},{b}] = {c}");
        }
    }
}

#[test]
fn correlated_normal_has_half_correlations() {
    let s = 100_000;
    let x = sample(&DistributionSpec::correlated_normal(3), s, 8).unwrap();
    let tol = 5.0 / (s as f64).sqrt();
    let c01: f64 = x.rows().into_iter().map(|r| r[0] * r[1]).sum::<f64>() / s as f64;
    assert!((c01 - 0.5).abs() < tol, "{c01}");
}

#[test]
fn simplex_means_are_equidistant() {
    for (m, d) in [(2, 1), (3, 2), (3, 3), (4, 3), (5, 4), (6, 9)] {
        let v = simplex_vertices(m, d, 10.0).unwrap();
        assert_eq!(v.len(), m);
        for i in 0..m {
            for j in 0..i {
                assert!(((&v[i] - &v[j]).norm() - 10.0).abs() < 1e-9, "m={m} d={d}");
            }
        }
    }
    let tri = simplex_vertices(3, 2, 10.0).unwrap();
    let sides = [(&tri[0] - &tri[1]).norm(), (&tri[1] - &tri[2]).norm(), (&tri[0] - &tri[2]).norm()];
    assert!(sides.iter().all(|s| (s - 10.0).abs() < 1e-9));
}

#[test]
fn mixture_labels_follow_weights() {
    // Far-apart 1-D components so each draw's label is recoverable from its value.
    let weights = [0.2, 0.5, 0.3];
    let spec = DistributionSpec::GaussianMixture {
        components: weights
            .iter()
            .enumerate()
            .map(|(i, &w)| MixtureComponent {
                weight: w,
                mean: DVector::from_element(1, 1000.0 * i as f64),
                cov: DMatrix::identity(1, 1),
            })
            .collect(),
    };
    let s = 100_000;
    let x = sample(&spec, s, 5).unwrap();
    let mut counts = [0f64; 3];
    for v in x.column(0) {
        counts[((v + 500.0) / 1000.0).floor() as usize] += 1.0;
    }
    let chi2: f64 = counts
        .iter()
        .zip(weights)
        .map(|(&o, w)| {
            let e = w * s as f64;
            (o - e).powi(2) / e
        })
        .sum();
    let p = ChiSquared::new(2.0).unwrap().sf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn student_t_truth_sums_coordinates() {
    let h = true_entropy(&DistributionSpec::cauchy(5)).value().unwrap();
    assert!((h - 5.0 * (4.0 * std::f64::consts::PI).ln()).abs() < 1e-10);
}

#[test]
fn sampling_does_not_depend_on_thread_count() {
    let spec = equidistant_mixture(3, 3, 10.0, None).unwrap();
    let a = sample(&spec, 1000, 17).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| sample(&spec, 1000, 17).unwrap());
    assert_eq!(a, b);
}
