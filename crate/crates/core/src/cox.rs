//! Weighted Cox partial-likelihood numerics.
//!
//! Every routine accepts inverse-probability weights `1 / (n * pi)`; a full
//! dataset is the special case `pi = 1/n` (unit weights). Ties use the
//! Breslow convention: tied event times share one risk set.
//!
//! The score is reported in the `+Σ {X − X̄}` orientation, so the estimate
//! is its root and the information is `−∂score/∂β`.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Records, SurvivalDataset, WeightedSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Linear predictors beyond this magnitude are rejected instead of saturating `exp`.
pub const ETA_LIMIT: f64 = 700.0;

/// Solver controls.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the score sup-norm.
    pub convergence_tol: f64,
    pub step_halving_max: usize,
    /// Study horizon; `None` means the largest observed time in the input.
    pub tau: Option<f64>,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings {
            max_iterations: 50,
            convergence_tol: 1e-8,
            step_halving_max: 20,
            tau: None,
        }
    }
}

impl EstimationSettings {
    fn horizon(&self, max_time: f64) -> f64 {
        self.tau.unwrap_or(max_time)
    }

    fn validate(&self) -> Result<()> {
        if !(self.convergence_tol > 0.0) {
            return Err(Error::invalid("convergence_tol must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(Error::invalid("tau must be positive"));
            }
        }
        Ok(())
    }
}

/// `S0 = Σ w e^{βᵀx}`, `S1 = Σ w x e^{βᵀx}`, `S2 = Σ w x xᵀ e^{βᵀx}` over a risk set.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetSums {
    pub s0: f64,
    pub s1: Vec<f64>,
    pub s2: Matrix,
}

impl RiskSetSums {
    /// `S1 / S0`, or `None` for an empty risk set.
    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.s0 > 0.0).then(|| self.s1.iter().map(|v| v / self.s0).collect())
    }
}

/// Right-continuous nondecreasing step function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if jump_times.len() != increments.len() {
            return Err(Error::DimensionMismatch {
                expected: jump_times.len(),
                found: increments.len(),
            });
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("jump times must be strictly increasing"));
        }
        if increments.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::invalid("increments must be nonnegative"));
        }
        let cumulative = increments
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        Ok(StepFunction {
            jump_times,
            increments,
            cumulative,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Number of jumps at or before `t`.
    #[inline]
    pub fn jumps_through(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.jumps_through(t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }
}

/// Output of a Newton fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Information at `beta`.
    pub information: Matrix,
    /// Weighted log partial likelihood at `beta`.
    pub loglik: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Linear predictors in sorted order and their maximum.
fn linear_predictors(rec: &Records<'_>, beta: &[f64]) -> Result<(Vec<f64>, f64)> {
    if beta.len() != rec.p {
        return Err(Error::DimensionMismatch {
            expected: rec.p,
            found: beta.len(),
        });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("beta must be finite"));
    }
    let mut shift = f64::NEG_INFINITY;
    let mut eta = Vec::with_capacity(rec.len());
    for i in 0..rec.len() {
        let e = dot(rec.row(i), beta);
        if !(e.abs() <= ETA_LIMIT) {
            return Err(Error::Overflow { eta: e });
        }
        shift = shift.max(e);
        eta.push(e);
    }
    Ok((eta, shift))
}

/// Linear predictors and shifted relative risks `e^{η − max η}` of every record.
pub(crate) struct Risks {
    shift: f64,
    relative: Vec<f64>,
}

impl Risks {
    pub fn new(rec: &Records<'_>, beta: &[f64]) -> Result<Self> {
        let (eta, shift) = linear_predictors(rec, beta)?;
        let relative = eta.iter().map(|e| libm::exp(e - shift)).collect();
        Ok(Risks { shift, relative })
    }
}

/// Log partial likelihood, score, and optionally the information, in one
/// descending-time sweep.
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub score: Vec<f64>,
    pub information: Option<Matrix>,
    /// Σ w diag(S2/S0) over events; the scale singular pivots are judged against.
    pub moment_scale: Vec<f64>,
}

pub(crate) fn evaluate(
    rec: &Records<'_>,
    beta: &[f64],
    tau: f64,
    with_information: bool,
) -> Result<Evaluation> {
    let p = rec.p;
    let n = rec.len();
    let (eta, shift) = linear_predictors(rec, beta)?;

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = Matrix::zeros(p);
    let mut loglik = 0.0;
    let mut score = vec![0.0; p];
    let mut info = Matrix::zeros(p);
    let mut moment_scale = vec![0.0; p];
    let mut xbar = vec![0.0; p];
    let mut events = 0usize;

    let mut start = 0;
    while start < n {
        let t = rec.times[start];
        let mut end = start;
        while end < n && rec.times[end] == t {
            let w = rec.weight(end) * libm::exp(eta[end] - shift);
            let x = rec.row(end);
            s0 += w;
            for (a, xj) in s1.iter_mut().zip(x) {
                *a += w * xj;
            }
            if with_information {
                s2.add_outer(w, x);
            }
            end += 1;
        }
        if t <= tau {
            let log_s0 = libm::log(s0);
            for (m, a) in xbar.iter_mut().zip(&s1) {
                *m = a / s0;
            }
            for i in start..end {
                if !rec.events[i] {
                    continue;
                }
                events += 1;
                let wi = rec.weight(i);
                loglik += wi * (eta[i] - shift - log_s0);
                for ((s, xj), m) in score.iter_mut().zip(rec.row(i)).zip(&xbar) {
                    *s += wi * (xj - m);
                }
                if with_information {
                    let inv = wi / s0;
                    for a in 0..p {
                        moment_scale[a] += inv * s2[(a, a)];
                        for b in 0..=a {
                            info[(a, b)] += inv * s2[(a, b)] - wi * xbar[a] * xbar[b];
                        }
                    }
                }
            }
        }
        start = end;
    }
    if events == 0 {
        return Err(Error::NoEvents);
    }
    let information = with_information.then(|| {
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        info
    });
    Ok(Evaluation {
        loglik,
        score,
        information,
        moment_scale,
    })
}

/// Risk-set sums at time `t`, by direct summation over the sample.
pub fn risk_set_sums(sample: &WeightedSample, beta: &[f64], t: f64) -> Result<RiskSetSums> {
    let rec = sample.records();
    let (eta, _) = linear_predictors(&rec, beta)?;
    let p = rec.p;
    let mut out = RiskSetSums {
        s0: 0.0,
        s1: vec![0.0; p],
        s2: Matrix::zeros(p),
    };
    for i in 0..rec.len() {
        if rec.times[i] < t {
            continue;
        }
        let w = rec.weight(i) * libm::exp(eta[i]);
        if !w.is_finite() {
            return Err(Error::Overflow { eta: eta[i] });
        }
        let x = rec.row(i);
        out.s0 += w;
        for (a, xj) in out.s1.iter_mut().zip(x) {
            *a += w * xj;
        }
        out.s2.add_outer(w, x);
    }
    Ok(out)
}

/// `(1/n) Σ_{events, Y ≤ τ} (1/π) {X − X̄(Y)}`.
pub fn weighted_score(
    sample: &WeightedSample,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<Vec<f64>> {
    let tau = settings.horizon(sample.max_time());
    Ok(evaluate(&sample.records(), beta, tau, false)?.score)
}

/// `(1/n) Σ_{events} (1/π) [S2/S0 − (S1/S0)^{⊗2}]`, the negative score Jacobian.
pub fn weighted_information(
    sample: &WeightedSample,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<Matrix> {
    let tau = settings.horizon(sample.max_time());
    let ev = evaluate(&sample.records(), beta, tau, true)?;
    Ok(ev.information.expect("requested"))
}

/// `(1/n) Σ_{events} (1/π) {βᵀX − log S0(Y)}`.
pub fn log_partial_likelihood(
    sample: &WeightedSample,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<f64> {
    let tau = settings.horizon(sample.max_time());
    Ok(evaluate(&sample.records(), beta, tau, false)?.loglik)
}

pub(crate) fn newton_records(
    rec: &Records<'_>,
    beta_init: &[f64],
    tau: f64,
    settings: &EstimationSettings,
) -> Result<FitResult> {
    settings.validate()?;
    let mut beta = beta_init.to_vec();
    let mut ev = evaluate(rec, &beta, tau, true)?;
    let mut iterations = 0;
    let mut converged = sup_norm(&ev.score) <= settings.convergence_tol;
    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let info = ev.information.as_ref().expect("requested");
        let chol = info
            .cholesky(1e-10, Some(&ev.moment_scale))
            .map_err(|_| Error::NonIdentifiable)?;
        let step = chol.solve(&ev.score);

        let mut scale = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let trial = evaluate(rec, &candidate, tau, true);
            let accept = match &trial {
                Ok(t) => t.loglik >= ev.loglik - 1e-12 * ev.loglik.abs().max(1.0),
                Err(Error::Overflow { .. }) => false,
                Err(e) => return Err(e.clone()),
            };
            if accept || halvings >= settings.step_halving_max {
                break trial.ok().map(|t| (candidate, t));
            }
            scale *= 0.5;
            halvings += 1;
        };
        match accepted {
            Some((next_beta, next_ev)) => {
                beta = next_beta;
                ev = next_ev;
                converged = sup_norm(&ev.score) <= settings.convergence_tol;
            }
            // Every halved step overflowed: stop at the last finite iterate.
            None => break,
        }
    }
    let information = ev.information.expect("requested");
    // A stationary point with a singular information matrix is not an estimate.
    information
        .cholesky(1e-10, Some(&ev.moment_scale))
        .map_err(|_| Error::NonIdentifiable)?;
    Ok(FitResult {
        beta,
        converged,
        iterations,
        information,
        loglik: ev.loglik,
    })
}

/// Newton–Raphson with step halving on the weighted partial likelihood.
///
/// Exceeding the iteration cap is not an error: the last iterate comes back
/// with `converged == false`.
pub fn newton_fit(
    sample: &WeightedSample,
    beta_init: &[f64],
    settings: &EstimationSettings,
) -> Result<FitResult> {
    let tau = settings.horizon(sample.max_time());
    newton_records(&sample.records(), beta_init, tau, settings)
}

/// Unweighted full-data fit from `β = 0`.
pub fn full_data_fit(dataset: &SurvivalDataset, settings: &EstimationSettings) -> Result<FitResult> {
    let tau = settings.horizon(dataset.max_time());
    newton_records(&dataset.records(), &vec![0.0; dataset.p()], tau, settings)
}

pub(crate) fn breslow_records(rec: &Records<'_>, beta: &[f64], tau: f64) -> Result<StepFunction> {
    breslow_with(rec, &Risks::new(rec, beta)?, tau)
}

pub(crate) fn breslow_with(rec: &Records<'_>, risks: &Risks, tau: f64) -> Result<StepFunction> {
    let n = rec.len();
    let unshift = libm::exp(-risks.shift);
    let mut s0 = 0.0;
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut start = 0;
    while start < n {
        let t = rec.times[start];
        let mut end = start;
        let mut dn = 0.0;
        while end < n && rec.times[end] == t {
            s0 += rec.weight(end) * risks.relative[end];
            if rec.events[end] {
                dn += rec.weight(end);
            }
            end += 1;
        }
        if t <= tau && dn > 0.0 {
            times.push(t);
            jumps.push(dn / s0 * unshift);
        }
        start = end;
    }
    if times.is_empty() {
        return Err(Error::NoEvents);
    }
    times.reverse();
    jumps.reverse();
    StepFunction::new(times, jumps)
}

/// Weighted Breslow estimate of the cumulative baseline hazard,
/// `Λ̂₀(t) = (1/n) Σ_{events, Y ≤ t} (1/π) / S0(Y)`.
pub fn breslow_cumhaz(
    sample: &WeightedSample,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<StepFunction> {
    let tau = settings.horizon(sample.max_time());
    breslow_records(&sample.records(), beta, tau)
}

/// Precomputed pieces for score residuals: `X̄` at each cumulative-hazard
/// jump and the running sums `Λ(t)` and `A(t) = Σ X̄ dΛ`.
pub(crate) struct ResidualBasis<'f> {
    p: usize,
    tau: f64,
    cumhaz: &'f StepFunction,
    /// `X̄` at each jump, row-major.
    xbar: Vec<f64>,
    /// Cumulative `Σ X̄ dΛ` through each jump, row-major.
    cum_weighted: Vec<f64>,
}

impl<'f> ResidualBasis<'f> {
    pub fn new(rec: &Records<'_>, risks: &Risks, cumhaz: &'f StepFunction, tau: f64) -> Result<Self> {
        let p = rec.p;
        let jumps = cumhaz.jump_times();
        let m = jumps.len();
        let mut xbar = vec![0.0; m * p];
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut i = 0;
        // Walk jumps from latest to earliest, growing the risk set.
        for j in (0..m).rev() {
            let t = jumps[j];
            while i < rec.len() && rec.times[i] >= t {
                let w = rec.weight(i) * risks.relative[i];
                s0 += w;
                for (a, xk) in s1.iter_mut().zip(rec.row(i)) {
                    *a += w * xk;
                }
                i += 1;
            }
            if s0 > 0.0 {
                for k in 0..p {
                    xbar[j * p + k] = s1[k] / s0;
                }
            }
        }
        let mut cum_weighted = vec![0.0; m * p];
        let mut acc = vec![0.0; p];
        for j in 0..m {
            let d = cumhaz.increments()[j];
            for k in 0..p {
                acc[k] += xbar[j * p + k] * d;
                cum_weighted[j * p + k] = acc[k];
            }
        }
        Ok(ResidualBasis {
            p,
            tau,
            cumhaz,
            xbar,
            cum_weighted,
        })
    }

    /// `Δ{X − X̄(Y)} − e^{βᵀX} Σ_{jumps ≤ min(Y, τ)} {X − X̄(t)} dΛ(t)`, written into `out`.
    pub fn residual_into(&self, time: f64, event: bool, x: &[f64], eta: f64, out: &mut [f64]) {
        let horizon = if time < self.tau { time } else { self.tau };
        let k = self.cumhaz.jumps_through(horizon);
        self.residual_at(k, self.event_jump(k, time, event), x, libm::exp(eta), out);
    }

    /// Jump index of an event at `time`, given `k = jumps_through(min(time, τ))`.
    #[inline]
    fn event_jump(&self, k: usize, time: f64, event: bool) -> Option<usize> {
        // An event inside the horizon is always a jump time of its own Breslow estimate.
        (event && time <= self.tau && k > 0 && self.cumhaz.jump_times[k - 1] == time).then(|| k - 1)
    }

    #[inline]
    fn residual_at(&self, k: usize, event_jump: Option<usize>, x: &[f64], risk: f64, out: &mut [f64]) {
        let p = self.p;
        if k == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
        } else {
            let lambda = self.cumhaz.cumulative[k - 1];
            let a = &self.cum_weighted[(k - 1) * p..k * p];
            for c in 0..p {
                out[c] = -risk * (x[c] * lambda - a[c]);
            }
        }
        if let Some(j) = event_jump {
            let xb = &self.xbar[j * p..(j + 1) * p];
            for c in 0..p {
                out[c] += x[c] - xb[c];
            }
        }
    }

    /// Calls `f(i, v_i)` for every record in storage order (nonincreasing
    /// time), tracking the horizon's jump index with a single pointer.
    pub fn sweep(&self, rec: &Records<'_>, risks: &Risks, mut f: impl FnMut(usize, &[f64])) {
        let unshift = libm::exp(risks.shift);
        let jumps = self.cumhaz.jump_times();
        let mut k = jumps.len();
        let mut v = vec![0.0; self.p];
        for i in 0..rec.len() {
            let time = rec.times[i];
            let horizon = if time < self.tau { time } else { self.tau };
            while k > 0 && jumps[k - 1] > horizon {
                k -= 1;
            }
            let x = rec.row(i);
            let risk = risks.relative[i] * unshift;
            self.residual_at(k, self.event_jump(k, time, rec.events[i]), x, risk, &mut v);
            f(i, &v);
        }
    }
}

/// Score residuals for every record, in sorted order (row-major `len × p`).
pub(crate) fn residuals_records(
    rec: &Records<'_>,
    beta: &[f64],
    cumhaz: &StepFunction,
    tau: f64,
) -> Result<Vec<f64>> {
    let p = rec.p;
    let risks = Risks::new(rec, beta)?;
    let basis = ResidualBasis::new(rec, &risks, cumhaz, tau)?;
    let mut out = vec![0.0; rec.len() * p];
    basis.sweep(rec, &risks, |i, v| out[i * p..(i + 1) * p].copy_from_slice(v));
    Ok(out)
}

/// Score residual `∫ {X_i − X̄(t)} dM̂_i(t)` of unit `unit_index` (draw order).
pub fn score_residual(
    unit_index: usize,
    sample: &WeightedSample,
    beta: &[f64],
    cumhaz: &StepFunction,
    settings: &EstimationSettings,
) -> Result<Vec<f64>> {
    if unit_index >= sample.r() {
        return Err(Error::IndexOutOfRange {
            index: unit_index,
            len: sample.r(),
        });
    }
    let rec = sample.records();
    let tau = settings.horizon(sample.max_time());
    let basis = ResidualBasis::new(&rec, &Risks::new(&rec, beta)?, cumhaz, tau)?;
    let pos = sample.position()[unit_index];
    let x = rec.row(pos);
    let mut out = vec![0.0; rec.p];
    basis.residual_into(rec.times[pos], rec.events[pos], x, dot(x, beta), &mut out);
    Ok(out)
}

/// Score residuals of all units, in draw order.
pub fn score_residuals(
    sample: &WeightedSample,
    beta: &[f64],
    cumhaz: &StepFunction,
    settings: &EstimationSettings,
) -> Result<Vec<Vec<f64>>> {
    let tau = settings.horizon(sample.max_time());
    let sorted = residuals_records(&sample.records(), beta, cumhaz, tau)?;
    let p = sample.p();
    Ok(sample
        .position()
        .iter()
        .map(|&pos| sorted[pos * p..(pos + 1) * p].to_vec())
        .collect())
}

/// Sampling-variance "meat" matrix
/// `Γ̆ = (1/n²) Σ_i (1/π_i² − 1/π_i) v_i v_iᵀ`, with `v_i` the score
/// residuals at `beta` against the sample's own Breslow estimate.
pub fn gamma_hat(
    sample: &WeightedSample,
    beta: &[f64],
    settings: &EstimationSettings,
) -> Result<Matrix> {
    let tau = settings.horizon(sample.max_time());
    let rec = sample.records();
    let cumhaz = breslow_records(&rec, beta, tau)?;
    let resid = residuals_records(&rec, beta, &cumhaz, tau)?;
    let p = rec.p;
    let nf = sample.source_n() as f64;
    let mut gamma = Matrix::zeros(p);
    for (i, pi) in sample.sorted_pi().iter().enumerate() {
        let coef = (1.0 - pi) / (pi * pi) / (nf * nf);
        if coef > 0.0 {
            gamma.add_outer(coef, &resid[i * p..(i + 1) * p]);
        }
    }
    gamma.symmetrize();
    Ok(gamma)
}
