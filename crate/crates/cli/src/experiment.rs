//! Multi-trial experiment runner and its CSV / JSON outputs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use ptc_core::{
    build_histogram, histogram_entropy, sample, true_entropy, DistributionSpec, Estimate,
    EstimateContext, EstimatorRegistry, PtcError, Setting,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Selection};
use crate::ingest::{parse_columns, read_samples_csv};
use crate::{CliError, CliResult};

pub const RESULTS_VERSION: &str = "# ptc-results v1";

pub const RESULT_COLUMNS: [&str; 17] = [
    "trial",
    "method",
    "param_name",
    "param_value",
    "s",
    "d",
    "bins_per_dim_or_width",
    "estimate",
    "truth",
    "abs_error",
    "rel_error",
    "occupancy",
    "nnz_bins",
    "total_bins",
    "seed",
    "runtime_ms",
    "error_tag",
];

/// Reference seeds start here so they never collide with trial seeds.
const REFERENCE_SEED_OFFSET: u64 = 1 << 32;

/// Method tag of the large-sample histogram reference rows.
pub const REFERENCE_METHOD: &str = "reference";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub trial: usize,
    pub method: String,
    pub param_name: String,
    pub param_value: f64,
    pub s: usize,
    pub d: usize,
    pub binning: String,
    pub estimate: Option<f64>,
    pub truth: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub occupancy: Option<f64>,
    pub nnz_bins: Option<usize>,
    pub total_bins: Option<usize>,
    pub seed: u64,
    pub runtime_ms: f64,
    pub error_tag: Option<String>,
}

impl ResultRow {
    /// Relative error when defined, else absolute error.
    pub fn error(&self) -> Option<f64> {
        self.rel_error.or(self.abs_error)
    }

    fn fill_errors(&mut self) {
        if let (Some(est), Some(truth)) = (self.estimate, self.truth) {
            let abs = (est - truth).abs();
            self.abs_error = Some(abs);
            self.rel_error = (truth != 0.0).then(|| abs / truth.abs());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    ClosedForm,
    Reference,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub reference: bool,
    pub value: f64,
    pub samples: usize,
    pub trials: usize,
    pub binning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub method: String,
    pub param_name: String,
    pub param_value: f64,
    pub s: usize,
    pub rows: usize,
    pub failures: usize,
    pub median_estimate: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub median_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub min_error: Option<f64>,
    pub median_occupancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPick {
    pub trial: usize,
    pub param_value: f64,
    pub estimate: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestCell {
    pub method: String,
    pub param_name: String,
    pub s: usize,
    pub median_error: f64,
    pub mean_error: f64,
    pub median_estimate: f64,
    pub picks: Vec<BestPick>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub format: &'static str,
    pub source: String,
    pub d: usize,
    pub trials: usize,
    pub truth: Option<f64>,
    pub truth_source: TruthSource,
    pub reference: Option<Reference>,
    pub cells: Vec<Cell>,
    pub oracle_best: Vec<BestCell>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    /// Rows of `method` whose hyperparameter is `param_name = param_value`.
    pub fn rows_for<'a>(
        &'a self,
        method: &'a str,
        param_name: &'a str,
        param_value: f64,
    ) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.param_name == param_name && r.param_value == param_value)
    }

    pub fn cell(&self, method: &str, param_name: &str, param_value: f64, s: usize) -> Option<&Cell> {
        self.summary.cells.iter().find(|c| {
            c.method == method && c.param_name == param_name && c.param_value == param_value && c.s == s
        })
    }

    pub fn best(&self, method: &str, param_name: &str, s: usize) -> Option<&BestCell> {
        self.summary
            .oracle_best
            .iter()
            .find(|c| c.method == method && c.param_name == param_name && c.s == s)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn error_tag(e: &PtcError) -> &'static str {
    match e {
        PtcError::Index(_) => "index",
        PtcError::Argument(_) => "argument",
        PtcError::Invariant(_) => "invariant",
        PtcError::DegenerateModel(_) => "degenerate_model",
        PtcError::Grid { .. } => "grid",
        PtcError::Fit(_) => "fit",
        PtcError::Numerical { .. } => "numerical",
        PtcError::Capacity { .. } => "capacity",
    }
}

enum Source {
    Dist(DistributionSpec),
    Data(Arc<Array2<f64>>),
}

/// Mean histogram entropy over independent large samples.
pub fn histogram_reference(
    spec: &DistributionSpec,
    cfg: &ExperimentConfig,
) -> CliResult<(Reference, Vec<ResultRow>)> {
    let d = spec.dim();
    let binning = cfg.reference_binning;
    let rows = (0..cfg.reference_trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(REFERENCE_SEED_OFFSET + t as u64);
            let start = Instant::now();
            let x = sample(spec, cfg.reference_samples, seed)?;
            let grid = binning.grid_for(x.view())?;
            let h = build_histogram(x.view(), &grid)?;
            Ok(ResultRow {
                trial: t,
                method: REFERENCE_METHOD.into(),
                param_name: binning.param_name().into(),
                param_value: binning.param_value(),
                s: cfg.reference_samples,
                d,
                binning: binning.to_string(),
                estimate: Some(histogram_entropy(&h)),
                truth: None,
                abs_error: None,
                rel_error: None,
                occupancy: Some(ptc_core::occupancy(&h)),
                nnz_bins: Some(h.counts().nnz()),
                total_bins: Some(grid.shape().len()),
                seed,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                error_tag: None,
            })
        })
        .collect::<Result<Vec<_>, PtcError>>()?;
    let values: Vec<f64> = rows.iter().filter_map(|r| r.estimate).collect();
    let reference = Reference {
        reference: true,
        value: mean(&values).expect("at least one reference trial"),
        samples: cfg.reference_samples,
        trials: cfg.reference_trials,
        binning: binning.to_string(),
    };
    Ok((reference, rows))
}

fn rows_from_estimates(
    method: &str,
    settings: &[Setting],
    results: Vec<Result<Estimate, PtcError>>,
    base: &ResultRow,
    runtime_ms: f64,
) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for (setting, res) in settings.iter().zip(results) {
        match res {
            Ok(est) => {
                let label = est.setting.binning.map(|b| b.to_string()).unwrap_or_default();
                let row = |e: &Estimate, binning: String| {
                    let mut r = ResultRow {
                        method: method.to_string(),
                        param_name: e.setting.param_name.to_string(),
                        param_value: e.setting.param_value,
                        binning,
                        estimate: Some(e.value),
                        occupancy: e.diagnostics.occupancy,
                        nnz_bins: e.diagnostics.nnz_bins,
                        total_bins: e.diagnostics.total_bins,
                        runtime_ms,
                        ..base.clone()
                    };
                    r.fill_errors();
                    r
                };
                out.push(row(&est, label.clone()));
                for sub in &est.derived {
                    let tagged = format!("{label}|{}={}", est.setting.param_name, est.setting.param_value);
                    out.push(row(sub, tagged));
                }
            }
            Err(e) => {
                log::warn!("{method} failed in trial {} (s={}): {e}", base.trial, base.s);
                out.push(ResultRow {
                    method: method.to_string(),
                    param_name: setting.param_name.to_string(),
                    param_value: setting.param_value,
                    binning: setting.binning.map(|b| b.to_string()).unwrap_or_default(),
                    error_tag: Some(error_tag(&e).to_string()),
                    runtime_ms,
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Runs every (sample size, trial, method, setting) combination of `cfg`.
///
/// Trial `t` draws its sample with seed `cfg.seed + t`; the same seed drives the
/// random initialization of CP fits. Rows come back in a fixed order whatever
/// the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &EstimatorRegistry) -> CliResult<ExperimentOutput> {
    cfg.validate()?;
    let estimators = cfg
        .methods
        .iter()
        .map(|m| registry.get(m).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;

    let (source, sizes, d, label) = match (&cfg.dist, &cfg.input) {
        (Some(text), _) => {
            let spec = DistributionSpec::parse(text, cfg.dim).map_err(|e| CliError::Usage(e.to_string()))?;
            let label = spec.to_string();
            (Source::Dist(spec), cfg.sizes.clone(), cfg.dim, label)
        }
        (None, Some(path)) => {
            let cols = cfg.columns.as_deref().map(parse_columns);
            let data = read_samples_csv(path, cols.as_deref())?;
            let (s, d) = data.samples.dim();
            (Source::Data(Arc::new(data.samples)), vec![s], d, path.display().to_string())
        }
        (None, None) => unreachable!("validated"),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    pool.install(|| {
        let (truth, truth_source, reference, mut rows) = match &source {
            Source::Dist(spec) => match true_entropy(spec).value() {
                Some(h) => (Some(h), TruthSource::ClosedForm, None, Vec::new()),
                None => {
                    let (r, rows) = histogram_reference(spec, cfg)?;
                    (Some(r.value), TruthSource::Reference, Some(r), rows)
                }
            },
            Source::Data(_) => (None, TruthSource::None, None, Vec::new()),
        };

        let units: Vec<(usize, usize)> = sizes
            .iter()
            .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
            .collect();
        let per_unit: Vec<CliResult<Vec<ResultRow>>> = units
            .par_iter()
            .map(|&(s, trial)| {
                let seed = cfg.seed.wrapping_add(trial as u64);
                let samples = match &source {
                    Source::Dist(spec) => Arc::new(sample(spec, s, seed)?),
                    Source::Data(x) => Arc::clone(x),
                };
                let ctx = EstimateContext {
                    fit: cfg.fit.clone(),
                    seed,
                    enumeration_budget: cfg.budget,
                    taus: cfg.taus.clone(),
                    ..EstimateContext::default()
                };
                let base = ResultRow {
                    trial,
                    method: String::new(),
                    param_name: String::new(),
                    param_value: f64::NAN,
                    s,
                    d,
                    binning: String::new(),
                    estimate: None,
                    truth,
                    abs_error: None,
                    rel_error: None,
                    occupancy: None,
                    nnz_bins: None,
                    total_bins: None,
                    seed,
                    runtime_ms: 0.0,
                    error_tag: None,
                };
                let mut out = Vec::new();
                for est in &estimators {
                    let settings = est.settings(&cfg.sweep);
                    let start = Instant::now();
                    let results = est.estimate_many(samples.view(), &settings, &ctx);
                    // Settings of one method share work, so runtime is amortized over them.
                    let ms = start.elapsed().as_secs_f64() * 1e3 / settings.len().max(1) as f64;
                    let mut method_rows = rows_from_estimates(est.name(), &settings, results, &base, ms);
                    out.append(&mut method_rows);
                }
                Ok(out)
            })
            .collect();
        for unit in per_unit {
            rows.extend(unit?);
        }

        let summary = summarize(cfg, label, d, truth, truth_source, reference, &rows);
        Ok(ExperimentOutput { rows, summary })
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    source: String,
    d: usize,
    truth: Option<f64>,
    truth_source: TruthSource,
    reference: Option<Reference>,
    rows: &[ResultRow],
) -> Summary {
    let mut order: Vec<(String, String, u64, usize)> = Vec::new();
    let mut groups: HashMap<(String, String, u64, usize), Vec<&ResultRow>> = HashMap::new();
    for r in rows {
        let key = (r.method.clone(), r.param_name.clone(), r.param_value.to_bits(), r.s);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let cells = order
        .iter()
        .map(|key| {
            let g = &groups[key];
            let est: Vec<f64> = g.iter().filter_map(|r| r.estimate).collect();
            let err: Vec<f64> = g.iter().filter_map(|r| r.error()).collect();
            let occ: Vec<f64> = g.iter().filter_map(|r| r.occupancy).collect();
            Cell {
                method: key.0.clone(),
                param_name: key.1.clone(),
                param_value: f64::from_bits(key.2),
                s: key.3,
                rows: g.len(),
                failures: g.iter().filter(|r| r.error_tag.is_some()).count(),
                median_estimate: median(&est),
                mean_estimate: mean(&est),
                median_error: median(&err),
                mean_error: mean(&err),
                min_error: err.iter().copied().reduce(f64::min),
                median_occupancy: median(&occ),
            }
        })
        .collect();

    let oracle_best = if cfg.selection == Selection::OracleBest {
        oracle_best(rows)
    } else {
        Vec::new()
    };

    Summary {
        format: "ptc-summary v1",
        source,
        d,
        trials: cfg.trials,
        truth,
        truth_source,
        reference,
        cells,
        oracle_best,
    }
}

/// Per trial, the hyperparameter of each (method, parameter kind, s) with the smallest error.
pub fn oracle_best(rows: &[ResultRow]) -> Vec<BestCell> {
    let mut order: Vec<(String, String, usize)> = Vec::new();
    let mut picks: HashMap<(String, String, usize), Vec<BestPick>> = HashMap::new();
    for r in rows.iter().filter(|r| r.method != REFERENCE_METHOD) {
        let (Some(error), Some(estimate)) = (r.error(), r.estimate) else {
            continue;
        };
        let key = (r.method.clone(), r.param_name.clone(), r.s);
        let list = picks.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        match list.iter_mut().find(|p| p.trial == r.trial) {
            Some(p) if error < p.error => {
                *p = BestPick {
                    trial: r.trial,
                    param_value: r.param_value,
                    estimate,
                    error,
                }
            }
            Some(_) => {}
            None => list.push(BestPick {
                trial: r.trial,
                param_value: r.param_value,
                estimate,
                error,
            }),
        }
    }
    order
        .into_iter()
        .map(|key| {
            let mut list = picks.remove(&key).unwrap_or_default();
            list.sort_by_key(|p| p.trial);
            let errs: Vec<f64> = list.iter().map(|p| p.error).collect();
            let ests: Vec<f64> = list.iter().map(|p| p.estimate).collect();
            BestCell {
                method: key.0,
                param_name: key.1,
                s: key.2,
                median_error: median(&errs).unwrap_or(f64::NAN),
                mean_error: mean(&errs).unwrap_or(f64::NAN),
                median_estimate: median(&ests).unwrap_or(f64::NAN),
                picks: list,
            }
        })
        .collect()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Writes the versioned results CSV to a file.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_results(BufWriter::new(file), rows)
}

/// Version comment line, header, then one record per row.
pub fn write_results<W: Write>(mut out: W, rows: &[ResultRow]) -> CliResult<()> {
    writeln!(out, "{RESULTS_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.method.clone(),
            r.param_name.clone(),
            r.param_value.to_string(),
            r.s.to_string(),
            r.d.to_string(),
            r.binning.clone(),
            opt(&r.estimate),
            opt(&r.truth),
            opt(&r.abs_error),
            opt(&r.rel_error),
            opt(&r.occupancy),
            opt(&r.nnz_bins),
            opt(&r.total_bins),
            r.seed.to_string(),
            format!("{:.3}", r.runtime_ms),
            opt(&r.error_tag),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, summary: &Summary) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    Ok(())
}
