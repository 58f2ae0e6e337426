//! Experiment configuration from `key = value` files and command-line flags.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ptc_core::estimators::DEFAULT_ENUMERATION_BUDGET;
use ptc_core::{Binning, FitConfig, Sweep};

use crate::{CliError, CliResult};

/// How per-trial results are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    ReportAll,
    /// Also pick, per trial, the hyperparameter with the smallest error against the truth.
    OracleBest,
}

impl FromStr for Selection {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "report-all" | "all" => Ok(Selection::ReportAll),
            "oracle-best" | "best" => Ok(Selection::OracleBest),
            _ => Err(CliError::Usage(format!("selection must be report-all or oracle-best, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Distribution to sample, e.g. `normal` or `mixture:3`.
    pub dist: Option<String>,
    pub dim: usize,
    /// CSV of samples used instead of a distribution.
    pub input: Option<PathBuf>,
    pub columns: Option<String>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<String>,
    pub sweep: Sweep,
    pub taus: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Defaults to the results path with a `.summary.json` suffix.
    pub summary: Option<PathBuf>,
    pub selection: Selection,
    pub jobs: usize,
    pub budget: u128,
    pub fit: FitConfig,
    /// Sample size and trial count of the histogram reference used when no
    /// closed-form entropy exists.
    pub reference_samples: usize,
    pub reference_trials: usize,
    pub reference_binning: Binning,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dist: None,
            dim: 2,
            input: None,
            columns: None,
            sizes: vec![2500],
            trials: 25,
            methods: vec!["hist".into(), "ptc".into(), "knn".into()],
            sweep: Sweep::default(),
            taus: Vec::new(),
            seed: 0,
            out: None,
            summary: None,
            selection: Selection::ReportAll,
            jobs: 1,
            budget: DEFAULT_ENUMERATION_BUDGET,
            fit: FitConfig::default(),
            reference_samples: 1_000_000,
            reference_trials: 25,
            reference_binning: Binning::ScottRule { c: 3.5 },
        }
    }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> CliResult<T>
where
    T::Err: Display,
{
    v.trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("{key}: cannot parse '{v}': {e}")))
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

/// Comma-separated integers where `a..b` stands for `a, a+1, ..., b`.
pub fn parse_int_list(key: &str, v: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once("..") {
            Some((a, b)) => {
                let a: usize = parse_one(key, a)?;
                let b: usize = parse_one(key, b.trim_start_matches('='))?;
                if a > b {
                    return Err(CliError::Usage(format!("{key}: empty range '{item}'")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_one(key, item)?),
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Applies one setting. Keys match the long flag names; `_` and `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        let k = key.as_str();
        match k {
            "dist" => self.dist = Some(v.to_string()),
            "dim" => self.dim = parse_one(k, v)?,
            "input" => self.input = Some(PathBuf::from(v)),
            "columns" => self.columns = Some(v.to_string()),
            "sizes" | "samples" => self.sizes = parse_int_list(k, v)?,
            "trials" => self.trials = parse_one(k, v)?,
            "methods" => self.methods = parse_list(k, v)?,
            "binnings" | "ptc-binnings" => self.sweep.ptc_binnings = parse_list(k, v)?,
            "hist-binnings" => self.sweep.hist_binnings = parse_list(k, v)?,
            "ranks" => self.sweep.ranks = parse_int_list(k, v)?,
            "ks" => self.sweep.ks = parse_int_list(k, v)?,
            "taus" => self.taus = parse_list(k, v)?,
            "seed" => self.seed = parse_one(k, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "summary" => self.summary = Some(PathBuf::from(v)),
            "selection" => self.selection = v.parse()?,
            "jobs" => self.jobs = parse_one(k, v)?,
            "budget" => self.budget = parse_one::<f64>(k, v)? as u128,
            "max-iters" => self.fit.max_outer_iters = parse_one(k, v)?,
            "kkt-tol" => self.fit.kkt_tol = parse_one(k, v)?,
            "reference-samples" => self.reference_samples = parse_one(k, v)?,
            "reference-trials" => self.reference_trials = parse_one(k, v)?,
            "reference-binning" => self.reference_binning = parse_one(k, v)?,
            _ => return Err(CliError::Usage(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        match (&self.dist, &self.input) {
            (None, None) => return usage("either dist or input is required".into()),
            (Some(_), Some(_)) => return usage("dist and input are mutually exclusive".into()),
            _ => {}
        }
        if self.trials == 0 {
            return usage("trials must be at least 1".into());
        }
        if self.dist.is_some() && (self.sizes.is_empty() || self.sizes.iter().any(|&s| s < 2)) {
            return usage("sample sizes must all be at least 2".into());
        }
        if self.methods.is_empty() {
            return usage("no methods selected".into());
        }
        if self.jobs == 0 {
            return usage("jobs must be at least 1".into());
        }
        if self.taus.iter().any(|t| !(0.0..1.0).contains(t)) {
            return usage("thresholds must lie in [0, 1)".into());
        }
        if self.reference_samples < 2 || self.reference_trials == 0 {
            return usage("reference needs at least 2 samples and 1 trial".into());
        }
        self.fit.validate().map_err(CliError::from)
    }

    pub fn summary_path(&self) -> Option<PathBuf> {
        self.summary.clone().or_else(|| {
            self.out.as_ref().map(|o| {
                let mut s = o.clone().into_os_string();
                s.push(".summary.json");
                PathBuf::from(s)
            })
        })
    }
}
