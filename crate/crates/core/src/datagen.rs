//! Simulation designs: covariate laws, Cox event times under the baseline
//! hazard `λ₀(t) = 0.5 t`, uniform censoring calibrated to a target rate, and
//! multi-site assembly with deterministic per-(replicate, site) streams.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::{self, tag};

/// Size of the sample used to calibrate the censoring bound.
pub const CALIBRATION_SIZE: usize = 100_000;

/// Covariate laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    /// Case I: `N(0, Υ)`, `Υ_js = 0.3` off the diagonal, 1 on it.
    NormalEquiCorr,
    /// Case II: `0.5 N(−1, Υ) + 0.5 N(1, Υ)`, `Υ_js = 0.5^|j−s|`.
    MixedNormal,
    /// Case III: independent exponentials with rate 2.
    IndepExponential,
    /// Case IV: multivariate t, 10 degrees of freedom, scale `Υ_js = 0.5^|j−s|`.
    StudentT,
}

impl CaseTag {
    pub const ALL: [CaseTag; 4] = [
        CaseTag::NormalEquiCorr,
        CaseTag::MixedNormal,
        CaseTag::IndepExponential,
        CaseTag::StudentT,
    ];

    /// Roman numeral used in configs and reports.
    pub fn numeral(self) -> &'static str {
        match self {
            CaseTag::NormalEquiCorr => "I",
            CaseTag::MixedNormal => "II",
            CaseTag::IndepExponential => "III",
            CaseTag::StudentT => "IV",
        }
    }

    pub fn from_numeral(s: &str) -> Option<Self> {
        CaseTag::ALL.into_iter().find(|c| c.numeral().eq_ignore_ascii_case(s.trim()))
    }

    fn index(self) -> u64 {
        match self {
            CaseTag::NormalEquiCorr => 1,
            CaseTag::MixedNormal => 2,
            CaseTag::IndepExponential => 3,
            CaseTag::StudentT => 4,
        }
    }
}

/// Degrees of freedom of the Case IV t law.
pub const T_DF: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CovariateCase {
    pub tag: CaseTag,
    pub p: usize,
}

impl CovariateCase {
    pub fn new(tag: CaseTag, p: usize) -> Self {
        CovariateCase { tag, p }
    }

    /// The matrix `Υ` of the correlated cases (identity for Case III).
    pub fn correlation(&self) -> Matrix {
        let p = self.p;
        let mut m = Matrix::zeros(p);
        for j in 0..p {
            for s in 0..p {
                m[(j, s)] = match self.tag {
                    CaseTag::NormalEquiCorr => {
                        if j == s {
                            1.0
                        } else {
                            0.3
                        }
                    }
                    CaseTag::MixedNormal | CaseTag::StudentT => {
                        libm::pow(0.5, (j as f64 - s as f64).abs())
                    }
                    CaseTag::IndepExponential => {
                        if j == s {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        m
    }

    pub fn sampler(&self) -> Result<CovariateSampler> {
        if self.p == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        let lower = self
            .correlation()
            .cholesky(1e-12, None)
            .map_err(|_| Error::invalid("covariate correlation matrix is not positive definite"))?
            .lower()
            .to_vec();
        Ok(CovariateSampler {
            case: *self,
            lower,
            chi: ChiSquared::new(T_DF).expect("valid df"),
        })
    }
}

/// Draws covariate rows for one case.
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    case: CovariateCase,
    lower: Vec<f64>,
    chi: ChiSquared<f64>,
}

impl CovariateSampler {
    pub fn p(&self) -> usize {
        self.case.p
    }

    fn correlated_normal<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], z: &mut [f64]) {
        let p = self.case.p;
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..p {
            let row = &self.lower[i * p..i * p + i + 1];
            out[i] = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut z = [0.0; 64];
        let mut z_heap;
        let z: &mut [f64] = if self.case.p <= 64 {
            &mut z[..self.case.p]
        } else {
            z_heap = vec![0.0; self.case.p];
            &mut z_heap
        };
        match self.case.tag {
            CaseTag::NormalEquiCorr => self.correlated_normal(rng, out, z),
            CaseTag::MixedNormal => {
                self.correlated_normal(rng, out, z);
                let shift = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.iter_mut().for_each(|v| *v += shift);
            }
            CaseTag::IndepExponential => {
                for v in out.iter_mut() {
                    let u: f64 = Open01.sample(rng);
                    *v = -libm::log(u) / 2.0;
                }
            }
            CaseTag::StudentT => {
                self.correlated_normal(rng, out, z);
                let w: f64 = self.chi.sample(rng);
                let scale = libm::sqrt(T_DF / w);
                out.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
}

/// `n × p` row-major covariate matrix.
pub fn gen_covariates<R: Rng + ?Sized>(case: CovariateCase, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let sampler = case.sampler()?;
    let p = case.p;
    let mut out = vec![0.0; n * p];
    for row in out.chunks_exact_mut(p) {
        sampler.sample_into(rng, row);
    }
    Ok(out)
}

/// Inverts `Λ₀(t) e^{η} = E` with `Λ₀(t) = 0.25 t²`: `T = 2 √(E e^{−η})`.
#[inline]
pub fn event_time_from_exponential(e: f64, eta: f64) -> f64 {
    2.0 * libm::sqrt(e * libm::exp(-eta))
}

pub fn gen_event_time<R: Rng + ?Sized>(x: &[f64], beta0: &[f64], rng: &mut R) -> Result<f64> {
    if x.len() != beta0.len() {
        return Err(Error::DimensionMismatch {
            expected: beta0.len(),
            found: x.len(),
        });
    }
    let eta: f64 = x.iter().zip(beta0).map(|(a, b)| a * b).sum();
    if !(eta.abs() <= crate::cox::ETA_LIMIT) {
        return Err(Error::Overflow { eta });
    }
    let u: f64 = Open01.sample(rng);
    Ok(event_time_from_exponential(-libm::log(u), eta))
}

/// Finds `c0` such that `C ~ Uniform(0, c0)` censors a `target_cr` fraction,
/// by bisection on a fixed calibration sample of size [`CALIBRATION_SIZE`].
pub fn calibrate_censoring<R: Rng + ?Sized>(
    case: CovariateCase,
    beta0: &[f64],
    target_cr: f64,
    rng: &mut R,
    tol: f64,
) -> Result<f64> {
    if !(target_cr > 0.01 && target_cr < 0.99) {
        return Err(Error::invalid(alloc::format!(
            "target censoring rate must lie in (0.01, 0.99), got {target_cr}"
        )));
    }
    let sampler = case.sampler()?;
    let mut x = vec![0.0; case.p];
    // A record is censored iff T > c0 U, i.e. T / U > c0.
    let mut ratios = Vec::with_capacity(CALIBRATION_SIZE);
    for _ in 0..CALIBRATION_SIZE {
        sampler.sample_into(rng, &mut x);
        let t = gen_event_time(&x, beta0, rng)?;
        let u: f64 = Open01.sample(rng);
        ratios.push(t / u);
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let n = ratios.len() as f64;
    let rate = |c0: f64| (ratios.len() - ratios.partition_point(|&r| r <= c0)) as f64 / n;

    let mut hi = 1.0;
    let mut doublings = 0;
    while rate(hi) > target_cr {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Bracket("censoring rate never fell below target".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target_cr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let c0 = if (rate(lo) - target_cr).abs() < (rate(hi) - target_cr).abs() && lo > 0.0 {
        lo
    } else {
        hi
    };
    if (rate(c0) - target_cr).abs() > tol {
        return Err(Error::Bracket(alloc::format!(
            "calibrated rate {} misses target {target_cr}",
            rate(c0)
        )));
    }
    Ok(c0)
}

/// Simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub k: usize,
    pub n_per_site: usize,
    pub beta0: Vec<f64>,
    /// Covariate law of each site; length `k`.
    pub cases: Vec<CaseTag>,
    pub target_cr: f64,
    pub r0: usize,
    /// Subsample sizes to evaluate.
    pub r: Vec<usize>,
    pub delta: f64,
    pub replications: usize,
    pub master_seed: u64,
}

impl SimConfig {
    /// Homogeneous design: every site uses `case`.
    pub fn homogeneous(case: CaseTag, k: usize, beta0: Vec<f64>) -> Self {
        SimConfig {
            k,
            n_per_site: 100_000,
            beta0,
            cases: vec![case; k],
            target_cr: 0.2,
            r0: 200,
            r: vec![200, 400, 600, 800],
            delta: 0.1,
            replications: 200,
            master_seed: 20240601,
        }
    }

    /// Sites 1–4 drawn from Cases I, III, III, IV.
    pub fn heterogeneous(beta0: Vec<f64>) -> Self {
        SimConfig {
            cases: vec![
                CaseTag::NormalEquiCorr,
                CaseTag::IndepExponential,
                CaseTag::IndepExponential,
                CaseTag::StudentT,
            ],
            ..SimConfig::homogeneous(CaseTag::NormalEquiCorr, 4, beta0)
        }
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_per_site == 0 || self.r0 == 0 || self.replications == 0 {
            return Err(Error::invalid("k, n_per_site, r0 and replications must be at least 1"));
        }
        if self.r.is_empty() || self.r.iter().any(|r| *r == 0) {
            return Err(Error::invalid("r values must be at least 1"));
        }
        if self.beta0.is_empty() {
            return Err(Error::invalid("beta0 must be nonempty"));
        }
        if self.cases.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: self.cases.len(),
            });
        }
        if !(self.target_cr > 0.0 && self.target_cr < 1.0) {
            return Err(Error::invalid("target_cr must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid("delta must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A configuration with calibrated censoring bounds, ready to generate sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub config: SimConfig,
    /// `c0` per site.
    pub censoring_bound: Vec<f64>,
}

impl SimDesign {
    /// Calibrates `c0` once per distinct covariate case, on a stream derived
    /// from the master seed and the case.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut cache: Vec<(CaseTag, f64)> = Vec::new();
        let mut bounds = Vec::with_capacity(config.k);
        for &case in &config.cases {
            let c0 = match cache.iter().find(|(c, _)| *c == case) {
                Some((_, c0)) => *c0,
                None => {
                    let mut rng = seed::stream(config.master_seed, &[tag::CALIBRATION, case.index()]);
                    let c0 = calibrate_censoring(
                        CovariateCase::new(case, config.p()),
                        &config.beta0,
                        config.target_cr,
                        &mut rng,
                        0.01,
                    )?;
                    cache.push((case, c0));
                    c0
                }
            };
            bounds.push(c0);
        }
        Ok(SimDesign {
            config,
            censoring_bound: bounds,
        })
    }

    /// Site `site_index` of replicate `replicate_index`.
    pub fn site_dataset(&self, site_index: usize, replicate_index: usize) -> Result<SurvivalDataset> {
        let cfg = &self.config;
        if site_index >= cfg.k {
            return Err(Error::IndexOutOfRange {
                index: site_index,
                len: cfg.k,
            });
        }
        let mut rng = seed::stream(
            cfg.master_seed,
            &[tag::SITE_DATA, replicate_index as u64, site_index as u64],
        );
        generate_dataset(
            CovariateCase::new(cfg.cases[site_index], cfg.p()),
            &cfg.beta0,
            self.censoring_bound[site_index],
            cfg.n_per_site,
            &mut rng,
        )
    }
}

/// `n` records with `Y = min(T, C)`, `Δ = I(T ≤ C)`, `C ~ Uniform(0, c0)`.
pub fn generate_dataset<R: Rng + ?Sized>(
    case: CovariateCase,
    beta0: &[f64],
    c0: f64,
    n: usize,
    rng: &mut R,
) -> Result<SurvivalDataset> {
    let p = case.p;
    if beta0.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: beta0.len(),
        });
    }
    let sampler = case.sampler()?;
    let mut x = vec![0.0; n * p];
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for row in x.chunks_exact_mut(p) {
        sampler.sample_into(rng, row);
        let t = gen_event_time(row, beta0, rng)?;
        let u: f64 = Open01.sample(rng);
        let c = c0 * u;
        if t <= c {
            times.push(t);
            events.push(true);
        } else {
            times.push(c);
            events.push(false);
        }
    }
    SurvivalDataset::from_columns(times, events, x, p)
}

/// Calibrates and generates one site; see [`SimDesign`] for repeated use.
pub fn gen_site_dataset(config: &SimConfig, site_index: usize, replicate_index: usize) -> Result<SurvivalDataset> {
    SimDesign::new(config.clone())?.site_dataset(site_index, replicate_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_event_times() {
        assert!((event_time_from_exponential(1.0, 0.0) - 2.0).abs() < 1e-15);
        assert!((event_time_from_exponential(1.0, libm::log(4.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn event_time_inverts_cumulative_hazard() {
        // Bisection on 0.25 t² e^η = E as an independent inversion.
        for (e, eta) in [(1.0, 0.0), (1.0, libm::log(4.0)), (0.3, -1.2), (2.5, 0.7)] {
            let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if 0.25 * mid * mid * libm::exp(eta) < e {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((event_time_from_exponential(e, eta) - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn case_lookup() {
        assert_eq!(CaseTag::from_numeral("iii"), Some(CaseTag::IndepExponential));
        assert_eq!(CaseTag::from_numeral("V"), None);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::homogeneous(CaseTag::NormalEquiCorr, 2, vec![1.0]);
        assert!(cfg.validate().is_ok());
        cfg.cases.pop();
        assert!(cfg.validate().is_err());
    }
}
