#![allow(dead_code)]

use dsubcox_core::{Subject, WeightedSample};
use rand::Rng;

/// Small random weighted sample with a few tied times.
pub fn random_sample<R: Rng>(rng: &mut R, r: usize, p: usize, source_n: usize) -> WeightedSample {
    let units: Vec<(Subject, f64)> = (0..r)
        .map(|_| {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
            // Coarse times so ties occur.
            let time = (rng.random_range(1..=12) as f64) * 0.25;
            let event = rng.random_bool(0.7);
            let pi = rng.random_range(0.05..1.0);
            (Subject::new(time, event, x), pi)
        })
        .collect();
    // Guarantee at least one event.
    let mut units = units;
    units[0].0.event = true;
    WeightedSample::new(&units, source_n).unwrap()
}

pub fn units(sample: &WeightedSample) -> Vec<(Subject, f64)> {
    (0..sample.r()).map(|i| sample.unit(i)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Risk-set weighted mean of X at time t by direct summation.
pub fn naive_xbar(units: &[(Subject, f64)], n: usize, beta: &[f64], t: f64) -> (f64, Vec<f64>) {
    let p = beta.len();
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    for (s, pi) in units {
        if s.time >= t {
            let w = libm::exp(dot(&s.covariates, beta)) / (n as f64 * pi);
            s0 += w;
            for k in 0..p {
                s1[k] += w * s.covariates[k];
            }
        }
    }
    (s0, s1.into_iter().map(|v| v / s0).collect())
}

/// Score by a double loop over events and risk sets.
pub fn naive_score(units: &[(Subject, f64)], n: usize, beta: &[f64]) -> Vec<f64> {
    let p = beta.len();
    let mut out = vec![0.0; p];
    for (s, pi) in units {
        if !s.event {
            continue;
        }
        let (_, xbar) = naive_xbar(units, n, beta, s.time);
        for k in 0..p {
            out[k] += (s.covariates[k] - xbar[k]) / (n as f64 * pi);
        }
    }
    out
}

/// Log partial likelihood by direct summation.
pub fn naive_loglik(units: &[(Subject, f64)], n: usize, beta: &[f64]) -> f64 {
    units
        .iter()
        .filter(|(s, _)| s.event)
        .map(|(s, pi)| {
            let (s0, _) = naive_xbar(units, n, beta, s.time);
            (dot(&s.covariates, beta) - libm::log(s0)) / (n as f64 * pi)
        })
        .sum()
}

/// Score residual as a literal finite sum over event times.
pub fn naive_residual(units: &[(Subject, f64)], n: usize, beta: &[f64], i: usize) -> Vec<f64> {
    let p = beta.len();
    let (si, _) = &units[i];
    let mut v = vec![0.0; p];
    if si.event {
        let (_, xbar) = naive_xbar(units, n, beta, si.time);
        for k in 0..p {
            v[k] += si.covariates[k] - xbar[k];
        }
    }
    let risk = libm::exp(dot(&si.covariates, beta));
    for (sj, pj) in units {
        if !sj.event || sj.time > si.time {
            continue;
        }
        let (s0, xbar) = naive_xbar(units, n, beta, sj.time);
        let d_lambda = 1.0 / (n as f64 * pj) / s0;
        for k in 0..p {
            v[k] -= (si.covariates[k] - xbar[k]) * risk * d_lambda;
        }
    }
    v
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
