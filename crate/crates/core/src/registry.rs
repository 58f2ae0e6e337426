//! Entropy estimators behind a common trait, looked up by name at run time.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;

use crate::cp_apr::{fit, FitConfig};
use crate::error::{PtcError, Result};
use crate::estimators::knn::{knn_entropy_sweep, TiePolicy};
use crate::estimators::ptc::{
    ptc_entropy_thresholded_with_budget, ptc_entropy_with_budget, PtcDensity,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::histogram::{build_histogram, histogram_entropy, occupancy, Binning, HistogramDensity};

/// One hyperparameter choice of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub binning: Option<Binning>,
    pub param_name: &'static str,
    pub param_value: f64,
}

impl Setting {
    /// Integer hyperparameter (rank or k).
    fn count(&self) -> Result<usize> {
        let v = self.param_value;
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(PtcError::Argument(format!("{} must be a positive integer, got {v}", self.param_name)))
        }
    }

    fn grid_binning(&self) -> Result<Binning> {
        self.binning
            .ok_or_else(|| PtcError::Argument("setting has no binning".into()))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.param_name, self.param_value)?;
        if let Some(b) = &self.binning {
            write!(f, " [{b}]")?;
        }
        Ok(())
    }
}

/// Hyperparameter grids an experiment sweeps over.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Grids the PTC model is fitted on.
    pub ptc_binnings: Vec<Binning>,
    /// Grids for the plain histogram estimator.
    pub hist_binnings: Vec<Binning>,
    pub ranks: Vec<usize>,
    pub ks: Vec<usize>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            ptc_binnings: vec![Binning::BinsPerDim(20)],
            hist_binnings: vec![Binning::ScottRule { c: 3.5 }],
            ranks: (1..=5).collect(),
            ks: (1..=10).chain([25, 50, 100, 200]).collect(),
        }
    }
}

/// Shared knobs that are not swept.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateContext {
    /// Template for CP fits; `rank` and `seed` are overwritten per call.
    pub fit: FitConfig,
    pub seed: u64,
    pub enumeration_budget: u128,
    /// Thresholds evaluated on every PTC fit in addition to the full entropy.
    pub taus: Vec<f64>,
    pub tie_policy: TiePolicy,
}

impl Default for EstimateContext {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            seed: 0,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            taus: Vec::new(),
            tie_policy: TiePolicy::default(),
        }
    }
}

/// Side information reported with an estimate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub occupancy: Option<f64>,
    pub nnz_bins: Option<usize>,
    pub total_bins: Option<usize>,
    pub outside: Option<usize>,
    pub loglik_first: Option<f64>,
    pub loglik_last: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub floored_distances: Option<usize>,
    pub retained_terms: Option<u128>,
    pub retained_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub setting: Setting,
    pub value: f64,
    pub diagnostics: Diagnostics,
    /// Estimates derived from the same fit, e.g. thresholded PTC entropies.
    pub derived: Vec<Estimate>,
}

pub trait EntropyEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Settings this estimator runs under `sweep`.
    fn settings(&self, sweep: &Sweep) -> Vec<Setting>;

    fn estimate(&self, samples: ArrayView2<f64>, setting: &Setting, ctx: &EstimateContext) -> Result<Estimate>;

    /// Runs several settings on one sample. Implementations may share work.
    fn estimate_many(
        &self,
        samples: ArrayView2<f64>,
        settings: &[Setting],
        ctx: &EstimateContext,
    ) -> Vec<Result<Estimate>> {
        settings.iter().map(|s| self.estimate(samples, s, ctx)).collect()
    }
}

fn histogram_diagnostics(h: &HistogramDensity) -> Diagnostics {
    Diagnostics {
        occupancy: Some(occupancy(h)),
        nnz_bins: Some(h.counts().nnz()),
        total_bins: Some(h.grid().shape().len()),
        outside: Some(h.outside()),
        ..Diagnostics::default()
    }
}

/// Plug-in entropy of the normalized histogram.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramEstimator;

impl EntropyEstimator for HistogramEstimator {
    fn name(&self) -> &'static str {
        "hist"
    }

    fn settings(&self, sweep: &Sweep) -> Vec<Setting> {
        sweep
            .hist_binnings
            .iter()
            .map(|b| Setting {
                binning: Some(*b),
                param_name: b.param_name(),
                param_value: b.param_value(),
            })
            .collect()
    }

    fn estimate(&self, samples: ArrayView2<f64>, setting: &Setting, _ctx: &EstimateContext) -> Result<Estimate> {
        let grid = setting.grid_binning()?.grid_for(samples)?;
        let h = build_histogram(samples, &grid)?;
        Ok(Estimate {
            setting: setting.clone(),
            value: histogram_entropy(&h),
            diagnostics: histogram_diagnostics(&h),
            derived: Vec::new(),
        })
    }
}

/// Entropy of the density induced by a rank-`R` Poisson CP fit of the histogram.
#[derive(Debug, Clone, Copy, Default)]
pub struct PtcEstimator;

impl PtcEstimator {
    fn estimate_on(&self, h: &HistogramDensity, setting: &Setting, ctx: &EstimateContext) -> Result<Estimate> {
        let rank = setting.count()?;
        let config = FitConfig {
            rank,
            seed: ctx.seed,
            ..ctx.fit.clone()
        };
        let result = fit(h.counts(), &config)?;
        let density = PtcDensity::new(result.model, h.grid().clone())?;
        let value = ptc_entropy_with_budget(&density, ctx.enumeration_budget)?;

        let derived = ctx
            .taus
            .iter()
            .map(|&tau| {
                let rep = ptc_entropy_thresholded_with_budget(&density, tau, ctx.enumeration_budget)?;
                Ok(Estimate {
                    setting: Setting {
                        binning: setting.binning,
                        param_name: "tau",
                        param_value: tau,
                    },
                    value: rep.entropy_estimate,
                    diagnostics: Diagnostics {
                        retained_terms: Some(rep.retained_terms),
                        retained_mass: Some(rep.retained_mass_fraction),
                        ..histogram_diagnostics(h)
                    },
                    derived: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Estimate {
            setting: setting.clone(),
            value,
            diagnostics: Diagnostics {
                loglik_first: result.loglik_trace.first().copied(),
                loglik_last: result.loglik_trace.last().copied(),
                iterations: Some(result.outer_iterations),
                converged: Some(result.converged),
                ..histogram_diagnostics(h)
            },
            derived,
        })
    }
}

impl EntropyEstimator for PtcEstimator {
    fn name(&self) -> &'static str {
        "ptc"
    }

    fn settings(&self, sweep: &Sweep) -> Vec<Setting> {
        sweep
            .ptc_binnings
            .iter()
            .flat_map(|b| {
                sweep.ranks.iter().map(move |&r| Setting {
                    binning: Some(*b),
                    param_name: "R",
                    param_value: r as f64,
                })
            })
            .collect()
    }

    fn estimate(&self, samples: ArrayView2<f64>, setting: &Setting, ctx: &EstimateContext) -> Result<Estimate> {
        let grid = setting.grid_binning()?.grid_for(samples)?;
        let h = build_histogram(samples, &grid)?;
        self.estimate_on(&h, setting, ctx)
    }

    /// Builds each distinct histogram once and fits every rank on it.
    fn estimate_many(
        &self,
        samples: ArrayView2<f64>,
        settings: &[Setting],
        ctx: &EstimateContext,
    ) -> Vec<Result<Estimate>> {
        let mut cache: Vec<(Binning, Result<HistogramDensity>)> = Vec::new();
        settings
            .iter()
            .map(|setting| {
                let binning = setting.grid_binning()?;
                let pos = match cache.iter().position(|(b, _)| *b == binning) {
                    Some(p) => p,
                    None => {
                        let h = binning
                            .grid_for(samples)
                            .and_then(|g| build_histogram(samples, &g));
                        cache.push((binning, h));
                        cache.len() - 1
                    }
                };
                match &cache[pos].1 {
                    Ok(h) => self.estimate_on(h, setting, ctx),
                    Err(e) => Err(e.clone()),
                }
            })
            .collect()
    }
}

/// Kozachenko-Leonenko nearest-neighbour estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KnnEstimator;

impl EntropyEstimator for KnnEstimator {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn settings(&self, sweep: &Sweep) -> Vec<Setting> {
        sweep
            .ks
            .iter()
            .map(|&k| Setting {
                binning: None,
                param_name: "k",
                param_value: k as f64,
            })
            .collect()
    }

    fn estimate(&self, samples: ArrayView2<f64>, setting: &Setting, ctx: &EstimateContext) -> Result<Estimate> {
        self.estimate_many(samples, std::slice::from_ref(setting), ctx)
            .pop()
            .expect("one result per setting")
    }

    /// One neighbour search serves every `k` below the sample size; larger `k` fail individually.
    fn estimate_many(
        &self,
        samples: ArrayView2<f64>,
        settings: &[Setting],
        ctx: &EstimateContext,
    ) -> Vec<Result<Estimate>> {
        let s = samples.nrows();
        let ks: Vec<Result<usize>> = settings.iter().map(Setting::count).collect();
        let mut valid: Vec<usize> = ks.iter().filter_map(|k| k.as_ref().ok().copied()).filter(|&k| k < s).collect();
        valid.sort_unstable();
        valid.dedup();
        let reports = knn_entropy_sweep(samples, &valid, ctx.tie_policy);
        settings
            .iter()
            .zip(ks)
            .map(|(setting, k)| {
                let k = k?;
                if k >= s {
                    return Err(PtcError::Argument(format!("k = {k} needs more than {s} samples")));
                }
                let reports = reports.as_ref().map_err(Clone::clone)?;
                let rep = reports.iter().find(|r| r.k == k).expect("k was swept");
                Ok(Estimate {
                    setting: setting.clone(),
                    value: rep.entropy,
                    diagnostics: Diagnostics {
                        floored_distances: Some(rep.floored),
                        ..Diagnostics::default()
                    },
                    derived: Vec::new(),
                })
            })
            .collect()
    }
}

/// Estimators keyed by name.
#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    entries: BTreeMap<String, Arc<dyn EntropyEstimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `hist`, `ptc` and `knn`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(HistogramEstimator));
        r.register(Arc::new(PtcEstimator));
        r.register(Arc::new(KnnEstimator));
        r
    }

    /// Adds `estimator`, replacing any previous one of the same name.
    pub fn register(&mut self, estimator: Arc<dyn EntropyEstimator>) {
        self.entries.insert(estimator.name().to_string(), estimator);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EntropyEstimator>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            PtcError::Argument(format!(
                "unknown method '{name}' (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl fmt::Debug for EstimatorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
