//! Subcommand definitions and their implementations.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use ptc_core::{
    sample, true_entropy, Binning, DistributionSpec, Estimate, EstimateContext, EstimatorRegistry,
    FitConfig, Sweep,
};
use serde_json::{json, Value};

use crate::config::{parse_list, ExperimentConfig};
use crate::experiment::{run_experiment, write_results, write_results_csv, write_summary, REFERENCE_METHOD};
use crate::ingest::{parse_columns, read_samples_csv, write_samples_csv};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ptc", version, about = "Entropy estimation with Poisson tensor models of histograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples from a distribution and write them as CSV.
    Sample(SampleArgs),
    /// Estimate the entropy of one sample with one method.
    Estimate(EstimateArgs),
    /// Run a multi-trial experiment and write results CSV plus a JSON summary.
    Experiment(ExperimentArgs),
    /// Parse a CSV of samples and report what would be used.
    IngestCheck(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// uniform[:a:b], normal, normal-corr, student-t:NU, cauchy, mixture:M[:SEP]
    #[arg(long)]
    pub dist: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, short = 's', default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV of samples, one per row.
    #[arg(long, conflicts_with = "dist")]
    pub input: Option<PathBuf>,
    /// Columns to read from the CSV, by zero-based position or header name.
    #[arg(long, requires = "input")]
    pub columns: Option<String>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, short = 's', default_value_t = 2500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimator name: hist, ptc or knn.
    #[arg(long, default_value = "ptc")]
    pub method: String,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// bins:N, c:C or width:W. Defaults to bins:20 for ptc and c:3.5 for hist.
    #[arg(long)]
    pub binning: Option<Binning>,
    /// Comma-separated thresholds for pruned PTC entropies.
    #[arg(long)]
    pub taus: Option<String>,
    /// Most bins (or terms) a single entropy evaluation may enumerate.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// File of `key = value` lines; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub columns: Option<String>,
    /// Sample sizes, e.g. `2500` or `1000,10000`.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// Comma-separated estimator names.
    #[arg(long)]
    pub methods: Option<String>,
    /// Grids for PTC fits, e.g. `bins:20` or `c:0.5,c:1`.
    #[arg(long)]
    pub binnings: Option<String>,
    #[arg(long)]
    pub hist_binnings: Option<String>,
    /// Ranks, e.g. `1..5`.
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub taus: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub summary: Option<String>,
    /// report-all or oracle-best.
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long)]
    pub jobs: Option<String>,
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub kkt_tol: Option<String>,
    #[arg(long)]
    pub reference_samples: Option<String>,
    #[arg(long)]
    pub reference_trials: Option<String>,
    #[arg(long)]
    pub reference_binning: Option<String>,
}

impl ExperimentArgs {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("dist", &self.dist),
            ("dim", &self.dim),
            ("input", &self.input),
            ("columns", &self.columns),
            ("sizes", &self.sizes),
            ("trials", &self.trials),
            ("methods", &self.methods),
            ("binnings", &self.binnings),
            ("hist-binnings", &self.hist_binnings),
            ("ranks", &self.ranks),
            ("ks", &self.ks),
            ("taus", &self.taus),
            ("seed", &self.seed),
            ("out", &self.out),
            ("summary", &self.summary),
            ("selection", &self.selection),
            ("jobs", &self.jobs),
            ("budget", &self.budget),
            ("max-iters", &self.max_iters),
            ("kkt-tol", &self.kkt_tol),
            ("reference-samples", &self.reference_samples),
            ("reference-trials", &self.reference_trials),
            ("reference-binning", &self.reference_binning),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the config file, then flags.
    pub fn to_config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.pairs() {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub columns: Option<String>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => cmd_sample(&a),
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Experiment(a) => cmd_experiment(&a.to_config()?, out),
        Command::IngestCheck(a) => cmd_ingest_check(&a, out),
    }
}

fn parse_spec(text: &str, dim: usize) -> CliResult<DistributionSpec> {
    DistributionSpec::parse(text, dim).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cmd_sample(a: &SampleArgs) -> CliResult<()> {
    let spec = parse_spec(&a.dist, a.dim)?;
    let x = sample(&spec, a.samples, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    write_samples_csv(&a.out, &x)
}

fn estimate_json(method: &str, e: &Estimate, x: &Array2<f64>, seed: u64, truth: Option<f64>) -> Value {
    let dg = &e.diagnostics;
    let mut v = json!({
        "method": method,
        "param_name": e.setting.param_name,
        "param_value": e.setting.param_value,
        "binning": e.setting.binning.map(|b| b.to_string()),
        "s": x.nrows(),
        "d": x.ncols(),
        "seed": seed,
        "estimate": e.value,
        "truth": truth,
        "diagnostics": {
            "occupancy": dg.occupancy,
            "nnz_bins": dg.nnz_bins,
            "total_bins": dg.total_bins,
            "outside": dg.outside,
            "loglik_first": dg.loglik_first,
            "loglik_last": dg.loglik_last,
            "iterations": dg.iterations,
            "converged": dg.converged,
            "floored_distances": dg.floored_distances,
        },
    });
    if !e.derived.is_empty() {
        v["thresholded"] = e
            .derived
            .iter()
            .map(|d| {
                json!({
                    "tau": d.setting.param_value,
                    "estimate": d.value,
                    "retained_terms": d.diagnostics.retained_terms.map(|t| t.to_string()),
                    "retained_mass": d.diagnostics.retained_mass,
                })
            })
            .collect();
    }
    v
}

/// Prints one JSON line per setting the chosen method runs.
pub fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> CliResult<()> {
    let (x, truth) = match (&a.input, &a.dist) {
        (Some(path), _) => {
            let cols = a.columns.as_deref().map(parse_columns);
            (read_samples_csv(path, cols.as_deref())?.samples, None)
        }
        (None, Some(text)) => {
            let spec = parse_spec(text, a.dim)?;
            let x = sample(&spec, a.samples, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
            (x, true_entropy(&spec).value())
        }
        (None, None) => return Err(CliError::Usage("either --input or --dist is required".into())),
    };
    let registry = EstimatorRegistry::with_defaults();
    let est = registry.get(&a.method).map_err(|e| CliError::Usage(e.to_string()))?;
    let default_binning = if a.method == "hist" {
        Binning::ScottRule { c: 3.5 }
    } else {
        Binning::BinsPerDim(20)
    };
    let binning = a.binning.unwrap_or(default_binning);
    let sweep = Sweep {
        ptc_binnings: vec![binning],
        hist_binnings: vec![binning],
        ranks: vec![a.rank],
        ks: vec![a.k],
    };
    let mut fit = FitConfig::default();
    if let Some(n) = a.max_iters {
        fit.max_outer_iters = n;
    }
    let mut ctx = EstimateContext {
        fit,
        seed: a.seed,
        ..EstimateContext::default()
    };
    if let Some(t) = &a.taus {
        ctx.taus = parse_list("taus", t)?;
    }
    if let Some(b) = a.budget {
        ctx.enumeration_budget = b as u128;
    }
    for setting in est.settings(&sweep) {
        let e = est.estimate(x.view(), &setting, &ctx)?;
        writeln!(out, "{}", estimate_json(est.name(), &e, &x, a.seed, truth))?;
    }
    Ok(())
}

/// Runs the experiment, writes results to `cfg.out` (or `out`) and the summary next to it.
pub fn cmd_experiment(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let registry = EstimatorRegistry::with_defaults();
    let result = run_experiment(cfg, &registry)?;
    match &cfg.out {
        Some(path) => write_results_csv(path, &result.rows)?,
        None => write_results(&mut *out, &result.rows)?,
    }
    if let Some(path) = cfg.summary_path() {
        write_summary(&path, &result.summary)?;
    }
    let runs: Vec<_> = result.rows.iter().filter(|r| r.method != REFERENCE_METHOD).collect();
    let failed = runs.iter().filter(|r| r.error_tag.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed", runs.len());
    }
    if !runs.is_empty() && failed == runs.len() {
        return Err(CliError::Core(ptc_core::PtcError::Numerical {
            iteration: 0,
            reason: "every experiment row failed".into(),
        }));
    }
    Ok(())
}

pub fn cmd_ingest_check(a: &IngestArgs, out: &mut dyn Write) -> CliResult<()> {
    let cols = a.columns.as_deref().map(parse_columns);
    let data = read_samples_csv(&a.input, cols.as_deref())?;
    let v = json!({
        "rows": data.samples.nrows(),
        "columns": data.samples.ncols(),
        "dropped": data.dropped,
        "header": data.header,
    });
    writeln!(out, "{v}")?;
    Ok(())
}
