//! Wall-clock comparison of the subsampling pipelines against the full-data fit.
//!
//! Everything runs on the calling thread. Data generation and the one-time
//! sort into time order happen before the clock starts, for every method.

use std::time::Instant;

use dsubcox_core::cox::full_data_fit;
use dsubcox_core::datagen::{CaseTag, SimConfig, SimDesign};
use dsubcox_core::seed::{self, tag};
use dsubcox_core::subsample::two_step_fit;
use dsubcox_core::{aggregate, EstimationSettings, SurvivalDataset, TwoStepConfig};

use crate::config::DEFAULT_BETA0;
use crate::error::{HarnessError, Result};
use crate::experiment::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimedMethod {
    Unif,
    Osp,
    FullData,
}

impl TimedMethod {
    pub const ALL: [TimedMethod; 3] = [TimedMethod::Unif, TimedMethod::Osp, TimedMethod::FullData];

    pub fn label(self) -> &'static str {
        match self {
            TimedMethod::Unif => "UNIF",
            TimedMethod::Osp => "OSP",
            TimedMethod::FullData => "FullData",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub n_total: usize,
    pub k: usize,
    pub beta0: Vec<f64>,
    pub case: CaseTag,
    pub target_cr: f64,
    pub r0: usize,
    pub r: usize,
    pub delta: f64,
    pub repeats: usize,
    pub master_seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n_total: 1_000_000,
            k: 4,
            beta0: DEFAULT_BETA0.to_vec(),
            case: CaseTag::NormalEquiCorr,
            target_cr: 0.2,
            r0: 200,
            r: 800,
            delta: 0.1,
            repeats: 3,
            master_seed: 20240601,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: TimedMethod,
    pub n_total: usize,
    pub p: usize,
    /// Mean over repeats.
    pub seconds: f64,
    pub repeats: usize,
}

fn pooled(sites: &[SurvivalDataset]) -> Result<SurvivalDataset> {
    let p = sites[0].p();
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut x = Vec::new();
    for s in sites.iter().flat_map(|ds| ds.subjects()) {
        times.push(s.time);
        events.push(s.event);
        x.extend_from_slice(&s.covariates);
    }
    SurvivalDataset::from_columns(times, events, x, p).map_err(|e| HarnessError::numerical("pooling sites", e))
}

fn subsample_pipeline(
    sites: &[SurvivalDataset],
    cfg: &TimingConfig,
    method: Method,
    repeat: usize,
    settings: &EstimationSettings,
) -> Result<()> {
    let summaries = sites
        .iter()
        .enumerate()
        .map(|(site, ds)| {
            let tcfg = TwoStepConfig::new(format!("site-{}", site + 1), cfg.r0, cfg.r, cfg.delta, method.site_method());
            let mut rng = seed::stream(cfg.master_seed, &[tag::SITE_SAMPLING, repeat as u64, site as u64]);
            two_step_fit(ds, &tcfg, &mut rng, settings)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::numerical(format!("{method} site fit"), e))?;
    aggregate(&summaries).map_err(|e| HarnessError::numerical(format!("{method} aggregation"), e))?;
    Ok(())
}

/// Mean wall-clock seconds per method over `repeats` runs.
pub fn run_timing(cfg: &TimingConfig, settings: &EstimationSettings) -> Result<Vec<TimingRow>> {
    if cfg.repeats == 0 || cfg.k == 0 || cfg.n_total < cfg.k {
        return Err(HarnessError::Usage("timing needs repeats ≥ 1 and n_total ≥ k ≥ 1".into()));
    }
    let sim = SimConfig {
        k: cfg.k,
        n_per_site: cfg.n_total / cfg.k,
        cases: vec![cfg.case; cfg.k],
        target_cr: cfg.target_cr,
        r0: cfg.r0,
        r: vec![cfg.r],
        delta: cfg.delta,
        replications: 2,
        master_seed: cfg.master_seed,
        ..SimConfig::homogeneous(cfg.case, cfg.k, cfg.beta0.clone())
    };
    let design = SimDesign::new(sim).map_err(|e| HarnessError::numerical("censoring calibration", e))?;
    let sites = (0..cfg.k)
        .map(|site| design.site_dataset(site, 0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::numerical("data generation", e))?;
    let all = pooled(&sites)?;

    let mut rows = Vec::new();
    for method in TimedMethod::ALL {
        let mut total = 0.0;
        for repeat in 0..cfg.repeats {
            let start = Instant::now();
            match method {
                TimedMethod::Unif => subsample_pipeline(&sites, cfg, Method::Unif, repeat, settings)?,
                TimedMethod::Osp => subsample_pipeline(&sites, cfg, Method::Osp, repeat, settings)?,
                TimedMethod::FullData => {
                    let fit = full_data_fit(&all, settings).map_err(|e| HarnessError::numerical("full-data fit", e))?;
                    std::hint::black_box(fit);
                }
            }
            total += start.elapsed().as_secs_f64();
        }
        rows.push(TimingRow {
            method,
            n_total: all.n(),
            p: all.p(),
            seconds: total / cfg.repeats as f64,
            repeats: cfg.repeats,
        });
    }
    Ok(rows)
}
