//! Monte Carlo comparison of optimal (OSP) and uniform (UNIF) subsampling.
//!
//! Each replicate generates the K site datasets once; every (method, r) cell
//! is fitted on those same datasets, so the comparison is paired and only the
//! sampling plans differ. Replicates run on a rayon pool and are collected in
//! replicate order, so results do not depend on scheduling.

use rayon::prelude::*;

use dsubcox_core::datagen::{SimConfig, SimDesign};
use dsubcox_core::seed::{self, tag};
use dsubcox_core::stats::normal_quantile;
use dsubcox_core::subsample::{two_step_fit, SiteMethod};
use dsubcox_core::{aggregate, DistributedEstimate, EstimationSettings, SurvivalDataset, TwoStepConfig};

use crate::error::{HarnessError, Result};

/// Largest tolerated share of failed replicates per (method, r) cell.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Osp,
    Unif,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Osp, Method::Unif];

    pub fn label(self) -> &'static str {
        match self {
            Method::Osp => "OSP",
            Method::Unif => "UNIF",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_uppercase().as_str() {
            "OSP" => Some(Method::Osp),
            "UNIF" => Some(Method::Unif),
            _ => None,
        }
    }

    pub fn site_method(self) -> SiteMethod {
        match self {
            Method::Osp => SiteMethod::Optimal,
            Method::Unif => SiteMethod::Uniform,
        }
    }

    fn stream_id(self) -> u64 {
        match self {
            Method::Osp => 0,
            Method::Unif => 1,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of one (method, r) cell in one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    pub method: Method,
    pub r: usize,
    pub outcome: std::result::Result<DistributedEstimate, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub fits: Vec<CellFit>,
}

/// Sampling stream for one site fit: independent of the data streams and of
/// every other (method, r, site) combination.
pub fn sampling_stream(master_seed: u64, replicate: usize, site: usize, method: Method, r: usize) -> seed::Stream {
    seed::stream(
        master_seed,
        &[tag::SITE_SAMPLING, replicate as u64, site as u64, method.stream_id(), r as u64],
    )
}

/// Fits every site with `method` at subsample size `r` and aggregates.
pub fn fit_cell(
    datasets: &[SurvivalDataset],
    config: &SimConfig,
    replicate: usize,
    method: Method,
    r: usize,
    settings: &EstimationSettings,
) -> std::result::Result<DistributedEstimate, String> {
    let summaries = datasets
        .iter()
        .enumerate()
        .map(|(site, ds)| {
            let tcfg = TwoStepConfig::new(format!("site-{}", site + 1), config.r0, r, config.delta, method.site_method());
            let mut rng = sampling_stream(config.master_seed, replicate, site, method, r);
            two_step_fit(ds, &tcfg, &mut rng, settings).map_err(|e| format!("site {}: {e}", site + 1))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    aggregate(&summaries).map_err(|e| format!("aggregation: {e}"))
}

/// One replicate: generate the K datasets, then fit every (method, r) cell.
pub fn run_replicate(design: &SimDesign, replicate: usize, settings: &EstimationSettings) -> Result<ReplicateResult> {
    let cfg = &design.config;
    let datasets = (0..cfg.k)
        .map(|site| design.site_dataset(site, replicate))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::numerical(format!("replicate {replicate}: data generation"), e))?;
    let mut fits = Vec::with_capacity(2 * cfg.r.len());
    for &method in &Method::ALL {
        for &r in &cfg.r {
            fits.push(CellFit {
                method,
                r,
                outcome: fit_cell(&datasets, cfg, replicate, method, r, settings),
            });
        }
    }
    Ok(ReplicateResult { replicate, fits })
}

/// Summary statistics of one coefficient over the successful replicates of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    pub r: usize,
    /// Zero-based coefficient index.
    pub coef: usize,
    /// Mean estimate minus the true value.
    pub bias: f64,
    /// Sample standard deviation of the estimates.
    pub ese: f64,
    /// Mean estimated standard error.
    pub se: f64,
    /// Share of 95% Wald intervals covering the true value.
    pub cp: f64,
    /// Mean squared Euclidean error of the whole coefficient vector.
    pub mse: f64,
    /// Successful replicates.
    pub reps: usize,
    pub failures: usize,
}

/// One estimate with its standard errors, as fed to [`compute_metrics`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
}

/// Bias/ESE/SE/CP/MSE for every coefficient of one (method, r) cell.
pub fn compute_metrics(method: Method, r: usize, estimates: &[Estimate], beta0: &[f64], failures: usize) -> Vec<MetricsRow> {
    let b = estimates.len();
    let z = normal_quantile(0.975);
    let mse = if b == 0 {
        f64::NAN
    } else {
        estimates
            .iter()
            .map(|e| e.beta.iter().zip(beta0).map(|(x, t)| (x - t) * (x - t)).sum::<f64>())
            .sum::<f64>()
            / b as f64
    };
    (0..beta0.len())
        .map(|j| {
            let values: Vec<f64> = estimates.iter().map(|e| e.beta[j]).collect();
            let mean = values.iter().sum::<f64>() / b as f64;
            let ese = if b >= 2 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            let covered = estimates
                .iter()
                .filter(|e| (e.beta[j] - beta0[j]).abs() <= z * e.se[j])
                .count();
            MetricsRow {
                method,
                r,
                coef: j,
                bias: mean - beta0[j],
                ese,
                se: estimates.iter().map(|e| e.se[j]).sum::<f64>() / b as f64,
                cp: covered as f64 / b as f64,
                mse,
                reps: b,
                failures,
            }
        })
        .collect()
}

/// Per-replicate estimate for the raw-estimates report.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEstimate {
    pub replicate: usize,
    pub method: Method,
    pub r: usize,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// `‖β_DSE − β₀‖ ≤ K·max_k ‖β_k − β₀‖` for this replicate.
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub replicate: usize,
    pub method: Method,
    pub r: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: SimConfig,
    /// Ordered by method, then r, then coefficient.
    pub rows: Vec<MetricsRow>,
    /// Ordered by replicate, then method, then r.
    pub raw: Vec<RawEstimate>,
    pub failures: Vec<Failure>,
}

impl ExperimentOutput {
    pub fn row(&self, method: Method, r: usize, coef: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|m| m.method == method && m.r == r && m.coef == coef)
    }

    /// Replicates whose combined estimate breaks the K·max distance bound.
    pub fn bound_violations(&self) -> usize {
        self.raw.iter().filter(|e| !e.within_bound).count()
    }
}

/// Reduces replicate results (in any order) into metrics and raw estimates.
pub fn summarize(config: &SimConfig, mut results: Vec<ReplicateResult>) -> Result<ExperimentOutput> {
    results.sort_by_key(|r| r.replicate);
    let mut raw = Vec::new();
    let mut failures = Vec::new();
    for rep in &results {
        for fit in &rep.fits {
            match &fit.outcome {
                Ok(est) => raw.push(RawEstimate {
                    replicate: rep.replicate,
                    method: fit.method,
                    r: fit.r,
                    beta: est.beta_dse.clone(),
                    se: est.standard_errors(),
                    within_bound: est.spread(&config.beta0).within_k_max(),
                }),
                Err(message) => failures.push(Failure {
                    replicate: rep.replicate,
                    method: fit.method,
                    r: fit.r,
                    message: message.clone(),
                }),
            }
        }
    }
    let total = results.len();
    let mut rows = Vec::new();
    for &method in &Method::ALL {
        for &r in &config.r {
            let cell_failures: Vec<&Failure> = failures.iter().filter(|f| f.method == method && f.r == r).collect();
            if cell_failures.len() as f64 > MAX_FAILURE_RATE * total as f64 {
                return Err(HarnessError::TooManyFailures {
                    method: method.label().into(),
                    r,
                    failed: cell_failures.len(),
                    total,
                    first: cell_failures[0].message.clone(),
                });
            }
            let estimates: Vec<Estimate> = raw
                .iter()
                .filter(|e| e.method == method && e.r == r)
                .map(|e| Estimate {
                    beta: e.beta.clone(),
                    se: e.se.clone(),
                })
                .collect();
            rows.extend(compute_metrics(method, r, &estimates, &config.beta0, cell_failures.len()));
        }
    }
    Ok(ExperimentOutput {
        config: config.clone(),
        rows,
        raw,
        failures,
    })
}

/// Runs all replicates of `config` in parallel and reduces them.
pub fn run_experiment(config: &SimConfig, settings: &EstimationSettings) -> Result<ExperimentOutput> {
    if config.replications < 2 {
        return Err(HarnessError::Usage("an experiment needs at least 2 replications".into()));
    }
    let design = SimDesign::new(config.clone()).map_err(|e| HarnessError::numerical("censoring calibration", e))?;
    let results = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replicate(&design, rep, settings))
        .collect::<Result<Vec<_>>>()?;
    summarize(config, results)
}
