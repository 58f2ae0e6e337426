//! Entropy estimation from low-rank Poisson CP models of multidimensional histograms.
//!
//! Samples are binned into a sparse count tensor, a rank-`R` Poisson CP model is
//! fitted to the counts, and the entropy of the piecewise-constant density it
//! induces is computed directly from the factors. Histogram and k-NN estimators
//! and closed-form entropies are included for comparison.

#![forbid(unsafe_code)]

pub mod cp_apr;
pub mod error;
pub mod estimators;
pub mod histogram;
pub mod registry;
pub mod samplers;
pub mod tensor;

pub use cp_apr::{fit, init_model, log_likelihood, FitConfig, FitResult};
pub use error::{PtcError, Result};
pub use histogram::{
    build_histogram, grid_from_samples, grid_from_width, histogram_entropy, occupancy, scott_width,
    BinLocation, Binning, BinningGrid, HistogramDensity,
};
pub use registry::{
    Diagnostics, EntropyEstimator, Estimate, EstimateContext, EstimatorRegistry, Setting, Sweep,
};
pub use samplers::{equidistant_mixture, sample, true_entropy, DistributionSpec, TrueEntropy};
pub use tensor::{
    delinearize, kruskal_entry, kruskal_total_mass, linearize, normalize_model, KruskalModel,
    MultiIndex, Shape, SparseCountTensor,
};
