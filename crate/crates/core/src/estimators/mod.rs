//! Density and entropy estimators built on histograms and fitted Poisson CP models.

pub mod closed_form;
pub mod knn;
pub mod mean_measure;
pub mod ptc;

pub use closed_form::{gaussian_entropy, student_t_entropy, uniform_entropy};
pub use knn::{knn_entropy, knn_entropy_sweep, KnnReport, TiePolicy};
pub use mean_measure::{true_mean_measure, Marginal, MeanMeasure};
pub use ptc::{
    plug_in_expectation, ptc_density_eval, ptc_entropy, ptc_entropy_thresholded,
    ptc_entropy_thresholded_with_budget, ptc_entropy_with_budget, PtcDensity, ThresholdReport,
    DEFAULT_ENUMERATION_BUDGET,
};
