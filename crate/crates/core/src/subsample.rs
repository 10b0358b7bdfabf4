//! Per-site two-step subsampling.
//!
//! 1. Fit a pilot estimate on a uniform subsample of size `r0`.
//! 2. Score every record by the norm of its estimated influence contribution
//!    (score residual) at the pilot, and mix the normalized norms with the
//!    uniform distribution: `π_i = (1 − δ) ‖v_i‖ / Σ‖v_j‖ + δ / n`.
//! 3. Draw `r` records with replacement, refit with inverse-probability
//!    weights, and summarize the fit as a [`SiteSummary`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cox::{self, EstimationSettings, ResidualBasis, Risks};
use crate::data::{SurvivalDataset, WeightedSample};
use crate::error::{Error, FitStage, Result};
use crate::linalg::Matrix;

/// Version of the [`SiteSummary`] payload layout.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Uniform,
    Optimal,
}

/// Sampling probabilities over a dataset's records, indexed in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    probabilities: Vec<f64>,
    delta: f64,
    kind: PlanKind,
    /// Set when an optimal plan was requested but every influence norm was
    /// zero, so the plan degenerated to uniform.
    fell_back: bool,
}

impl SamplingPlan {
    /// A plan from explicit probabilities. They must be nonnegative and sum
    /// to one within `1e-10`.
    pub fn from_probabilities(probabilities: Vec<f64>, delta: f64, kind: PlanKind) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("sampling plan needs at least one record"));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return Err(Error::invalid("sampling probabilities must lie in [0, 1]"));
        }
        let total = neumaier_sum(&probabilities);
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(alloc::format!(
                "sampling probabilities sum to {total}, not 1"
            )));
        }
        Ok(SamplingPlan {
            probabilities,
            delta,
            kind,
            fell_back: false,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> PlanKind {
        self.kind
    }

    pub fn fell_back(&self) -> bool {
        self.fell_back
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Compensated summation.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn uniform_plan(n: usize) -> Result<SamplingPlan> {
    if n == 0 {
        return Err(Error::invalid("uniform plan needs n >= 1"));
    }
    Ok(SamplingPlan {
        probabilities: vec![1.0 / n as f64; n],
        delta: 1.0,
        kind: PlanKind::Uniform,
        fell_back: false,
    })
}

/// Pilot fit on a uniform subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEstimate {
    pub beta_pilot: Vec<f64>,
    pub r0: usize,
    pub converged: bool,
}

/// `‖v_i‖` for every record (input order), where `v_i` is the score residual
/// at `beta` against the full-data risk sets and Breslow estimate.
pub fn influence_norms(
    dataset: &SurvivalDataset,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<Vec<f64>> {
    let rec = dataset.records();
    let tau = settings.tau.unwrap_or(dataset.max_time());
    let risks = Risks::new(&rec, beta)?;
    let cumhaz = cox::breslow_with(&rec, &risks, tau)?;
    let basis = ResidualBasis::new(&rec, &risks, &cumhaz, tau)?;
    let mut norms = vec![0.0; dataset.n()];
    let sort_index = dataset.sort_index();
    basis.sweep(&rec, &risks, |pos, v| {
        norms[sort_index[pos]] = libm::sqrt(v.iter().map(|c| c * c).sum());
    });
    Ok(norms)
}

/// Mixes normalized influence norms with the uniform distribution.
pub fn plan_from_norms(norms: &[f64], delta: f64) -> Result<SamplingPlan> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(alloc::format!("delta must lie in [0, 1], got {delta}")));
    }
    let n = norms.len();
    if n == 0 {
        return Err(Error::invalid("sampling plan needs at least one record"));
    }
    if norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("influence norms must be finite and nonnegative"));
    }
    let total = neumaier_sum(norms);
    let floor = delta / n as f64;
    if total == 0.0 {
        let mut plan = uniform_plan(n)?;
        plan.kind = PlanKind::Optimal;
        plan.delta = delta;
        plan.fell_back = true;
        return Ok(plan);
    }
    let scale = (1.0 - delta) / total;
    Ok(SamplingPlan {
        probabilities: norms.iter().map(|v| v * scale + floor).collect(),
        delta,
        kind: PlanKind::Optimal,
        fell_back: false,
    })
}

/// Influence-norm plan at the pilot estimate.
pub fn optimal_plan(
    dataset: &SurvivalDataset,
    pilot: &PilotEstimate,
    delta: f64,
    settings: &EstimationSettings,
) -> Result<SamplingPlan> {
    if !pilot.converged {
        return Err(Error::invalid("pilot estimate did not converge"));
    }
    let norms = influence_norms(dataset, &pilot.beta_pilot, settings)?;
    plan_from_norms(&norms, delta)
}

/// Walker/Vose alias table: O(n) build, O(1) per draw.
#[derive(Debug, Clone)]
pub struct AliasTable {
    threshold: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(probabilities: &[f64]) -> Result<Self> {
        let n = probabilities.len();
        if n == 0 {
            return Err(Error::invalid("alias table needs at least one entry"));
        }
        let total = neumaier_sum(probabilities);
        if !(total > 0.0) || probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("alias table weights must be nonnegative with positive sum"));
        }
        let mut scaled: Vec<f64> = probabilities.iter().map(|p| p * n as f64 / total).collect();
        let mut threshold = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::with_capacity(n);
        let mut large = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            threshold[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            threshold[i] = 1.0;
        }
        Ok(AliasTable { threshold, alias })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.threshold.len());
        if rng.random::<f64>() < self.threshold[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// `r` i.i.d. draws with replacement per `plan`; each unit keeps its `π`.
pub fn draw<R: Rng + ?Sized>(
    dataset: &SurvivalDataset,
    plan: &SamplingPlan,
    r: usize,
    rng: &mut R,
) -> Result<WeightedSample> {
    if r == 0 {
        return Err(Error::invalid("subsample size r must be at least 1"));
    }
    if plan.len() != dataset.n() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n(),
            found: plan.len(),
        });
    }
    let indices: Vec<usize> = match plan.kind() {
        // Equal probabilities need no table.
        PlanKind::Uniform => (0..r).map(|_| rng.random_range(0..plan.len())).collect(),
        PlanKind::Optimal => {
            let table = AliasTable::new(plan.probabilities())?;
            (0..r).map(|_| table.sample(rng)).collect()
        }
    };
    let pi: Vec<f64> = indices.iter().map(|&i| plan.probabilities()[i]).collect();
    WeightedSample::from_dataset(dataset, &indices, &pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteMethod {
    /// Pilot, influence-norm probabilities, weighted refit.
    Optimal,
    /// A single uniform subsample of size `r`, fitted from zero.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepConfig {
    pub site_id: String,
    pub r0: usize,
    pub r: usize,
    pub delta: f64,
    pub method: SiteMethod,
    /// Test-only: replace the main draw with the whole dataset at `π = 1/n`.
    pub census: bool,
}

impl TwoStepConfig {
    pub fn new(site_id: impl Into<String>, r0: usize, r: usize, delta: f64, method: SiteMethod) -> Self {
        TwoStepConfig {
            site_id: site_id.into(),
            r0,
            r,
            delta,
            method,
            census: false,
        }
    }
}

/// Everything a site transmits: no individual-level records.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSummary {
    pub site_id: String,
    /// Full-data size `n_k`.
    pub n: usize,
    /// Subsample size `r_k`.
    pub r: usize,
    pub beta: Vec<f64>,
    /// Weighted information at `beta`.
    pub psi: Matrix,
    /// Sampling-variance meat matrix at `beta`.
    pub gamma: Matrix,
    pub delta: f64,
    pub schema_version: u32,
}

impl SiteSummary {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Checks dimensions, finiteness, symmetry and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::invalid("summary has empty beta"));
        }
        for (name, m) in [("psi", &self.psi), ("gamma", &self.gamma)] {
            if m.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: m.dim(),
                });
            }
            if !m.all_finite() {
                return Err(Error::invalid(alloc::format!("{name} has non-finite entries")));
            }
            if !m.is_symmetric(1e-12) {
                return Err(Error::invalid(alloc::format!("{name} is not symmetric")));
            }
            if !m.is_psd(1e-10) {
                return Err(Error::invalid(alloc::format!("{name} is not positive semidefinite")));
            }
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta has non-finite entries"));
        }
        Ok(())
    }
}

fn converged_fit(
    sample: &WeightedSample,
    init: &[f64],
    settings: &EstimationSettings,
    stage: FitStage,
) -> Result<cox::FitResult> {
    let fit = cox::newton_fit(sample, init, settings).map_err(|e| e.at_stage(stage))?;
    if !fit.converged {
        return Err(Error::NotConverged {
            stage,
            iterations: fit.iterations,
            beta: fit.beta,
        });
    }
    Ok(fit)
}

/// Runs the site procedure and returns the transmittable summary.
pub fn two_step_fit<R: Rng + ?Sized>(
    dataset: &SurvivalDataset,
    config: &TwoStepConfig,
    rng: &mut R,
    settings: &EstimationSettings,
) -> Result<SiteSummary> {
    if config.r == 0 || (config.method == SiteMethod::Optimal && config.r0 == 0) {
        return Err(Error::invalid("r0 and r must be at least 1"));
    }
    let n = dataset.n();
    let p = dataset.p();
    let uniform = uniform_plan(n)?;

    let (init, plan) = match config.method {
        SiteMethod::Optimal => {
            let pilot_sample = draw(dataset, &uniform, config.r0, rng)?;
            let pilot_fit = converged_fit(&pilot_sample, &vec![0.0; p], settings, FitStage::Pilot)?;
            let pilot = PilotEstimate {
                beta_pilot: pilot_fit.beta,
                r0: config.r0,
                converged: true,
            };
            let plan = optimal_plan(dataset, &pilot, config.delta, settings)
                .map_err(|e| e.at_stage(FitStage::Probabilities))?;
            (pilot.beta_pilot, plan)
        }
        SiteMethod::Uniform => (vec![0.0; p], uniform),
    };

    let sample = if config.census {
        WeightedSample::census(dataset)
    } else {
        draw(dataset, &plan, config.r, rng)?
    };
    let fit = converged_fit(&sample, &init, settings, FitStage::Main)?;
    let gamma = cox::gamma_hat(&sample, &fit.beta, settings).map_err(|e| e.at_stage(FitStage::Main))?;
    Ok(SiteSummary {
        site_id: config.site_id.clone(),
        n,
        r: sample.r(),
        beta: fit.beta,
        psi: fit.information,
        gamma,
        delta: match config.method {
            SiteMethod::Optimal => config.delta,
            SiteMethod::Uniform => 1.0,
        },
        schema_version: SUMMARY_SCHEMA_VERSION,
    })
}

/// Sandwich variance `Ψ̆⁻¹ Γ̆ Ψ̆⁻¹` of a site estimate.
pub fn site_variance(summary: &SiteSummary) -> Result<Matrix> {
    let chol = summary.psi.cholesky(1e-12, None)?;
    Ok(chol.sandwich(&summary.gamma))
}
