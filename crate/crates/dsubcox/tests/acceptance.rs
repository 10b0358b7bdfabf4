//! Acceptance checks: one PASS/FAIL line per criterion.
//!
//! The Monte Carlo criteria share four experiments (Case I at 20% and 60%
//! censoring, and the heterogeneous design at both levels), each with K = 4
//! sites of 10⁵ records, r0 = 200, δ = 0.1 and 200 replicates, all from the
//! default master seed. The process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use dsubcox::core::cox::{full_data_fit, weighted_information, weighted_score};
use dsubcox::core::datagen::{
    calibrate_censoring, gen_event_time, generate_dataset, CaseTag, CovariateCase, SimConfig, SimDesign,
};
use dsubcox::core::subsample::{two_step_fit, SiteMethod};
use dsubcox::core::{aggregate, seed, EstimationSettings, Matrix, SiteSummary, Subject, TwoStepConfig, WeightedSample};
use dsubcox::config::DEFAULT_BETA0;
use dsubcox::experiment::{run_experiment, ExperimentOutput, Method};
use dsubcox::summary_file::{decode_summary, encode_summary};
use dsubcox::timing::{run_timing, TimedMethod, TimingConfig};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, elapsed: Duration, v: &Verdict) -> bool {
    println!(
        "{} {:>2}. {name}: {} [{:.1} s]",
        if v.pass { "PASS" } else { "FAIL" },
        id,
        v.detail,
        elapsed.as_secs_f64()
    );
    v.pass
}

fn settings() -> EstimationSettings {
    EstimationSettings::default()
}

// 1. Census two-step fit equals the full-data fit.
fn census_equivalence() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for s in 0..10u64 {
        let cfg = SimConfig {
            n_per_site: 1000,
            master_seed: 1000 + s,
            ..SimConfig::homogeneous(CaseTag::NormalEquiCorr, 1, DEFAULT_BETA0.to_vec())
        };
        let run = || -> Result<f64, String> {
            let ds = SimDesign::new(cfg.clone()).and_then(|d| d.site_dataset(0, 0)).map_err(|e| e.to_string())?;
            let full = full_data_fit(&ds, &settings()).map_err(|e| e.to_string())?;
            let mut tcfg = TwoStepConfig::new("census", 200, 1000, 0.1, SiteMethod::Optimal);
            tcfg.census = true;
            let site = two_step_fit(&ds, &tcfg, &mut seed::stream(s, &[]), &settings()).map_err(|e| e.to_string())?;
            Ok(site.beta.iter().zip(&full.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        };
        match run() {
            Ok(d) => worst = worst.max(d),
            Err(e) => errors.push(e),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: errors.is_empty() && worst <= 1e-6 && secs < 10.0,
        detail: format!(
            "max |β_census − β_full| = {worst:.2e} over 10 seeds (tol 1e-6), {} errors, {secs:.2} s (limit 10 s)",
            errors.len()
        ),
    }
}

// 2. Information equals the finite-difference Jacobian of the score.
fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut rng = seed::stream(2, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = rng.random_range(1..=4);
        let r = rng.random_range(5..=40);
        let mut units: Vec<(Subject, f64)> = (0..r)
            .map(|_| {
                let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
                let t = rng.random_range(1..=20) as f64 * 0.1;
                (Subject::new(t, rng.random_bool(0.7), x), rng.random_range(0.05..1.0))
            })
            .collect();
        units[0].0.event = true;
        let sample = WeightedSample::new(&units, 100).expect("valid sample");
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let info = weighted_information(&sample, &beta, &settings()).expect("information");
        let h = 1e-6;
        let mut fd = Matrix::zeros(p);
        for j in 0..p {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[j] += h;
            dn[j] -= h;
            let su = weighted_score(&sample, &up, &settings()).expect("score");
            let sd = weighted_score(&sample, &dn, &settings()).expect("score");
            for i in 0..p {
                fd[(i, j)] = -(su[i] - sd[i]) / (2.0 * h);
            }
        }
        let mut diff = fd;
        diff.add_scaled(-1.0, &info);
        worst = worst.max(diff.frobenius_norm() / info.frobenius_norm().max(1e-12));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: worst < 1e-5 && secs < 5.0,
        detail: format!("max relative Frobenius error {worst:.2e} on 50 instances (tol 1e-5), {secs:.2} s (limit 5 s)"),
    }
}

fn experiment_config(cr: f64, heterogeneous: bool, r: Vec<usize>) -> SimConfig {
    let base = if heterogeneous {
        SimConfig::heterogeneous(DEFAULT_BETA0.to_vec())
    } else {
        SimConfig::homogeneous(CaseTag::NormalEquiCorr, 4, DEFAULT_BETA0.to_vec())
    };
    SimConfig {
        target_cr: cr,
        r,
        ..base
    }
}

struct Experiments {
    cr20: Result<ExperimentOutput, String>,
    cr60: Result<ExperimentOutput, String>,
    het20: Result<ExperimentOutput, String>,
    het60: Result<ExperimentOutput, String>,
    elapsed: [Duration; 4],
}

fn run_all_experiments() -> Experiments {
    let mut elapsed = [Duration::ZERO; 4];
    let mut run = |i: usize, cfg: SimConfig| {
        let start = Instant::now();
        let out = run_experiment(&cfg, &settings()).map_err(|e| e.to_string());
        elapsed[i] = start.elapsed();
        out
    };
    let cr20 = run(0, experiment_config(0.2, false, vec![200, 400, 600, 800]));
    let cr60 = run(1, experiment_config(0.6, false, vec![800]));
    let het20 = run(2, experiment_config(0.2, true, vec![800]));
    let het60 = run(3, experiment_config(0.6, true, vec![800]));
    Experiments {
        cr20,
        cr60,
        het20,
        het60,
        elapsed,
    }
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn failed(e: &str) -> Verdict {
    Verdict {
        pass: false,
        detail: format!("experiment failed: {e}"),
    }
}

// 3. Case I, 20% censoring, r = 800: bias, ESE/SE and coverage of β₁.
fn table_cr20(out: &ExperimentOutput) -> Verdict {
    let m = out.row(Method::Osp, 800, 0).expect("row");
    let u = out.row(Method::Unif, 800, 0).expect("row");
    let ratio = m.ese / m.se;
    Verdict {
        pass: m.bias.abs() <= 0.015 && in_range(ratio, 0.85, 1.15) && in_range(m.cp, 0.92, 0.98),
        detail: format!(
            "OSP β₁: bias {:+.4} (|·| ≤ 0.015), ESE {:.4} / SE {:.4} = {ratio:.3} (0.85–1.15), CP {:.3} (0.92–0.98), {} reps; \
             UNIF: bias {:+.4}, ESE {:.4}, SE {:.4}, CP {:.3}",
            m.bias, m.ese, m.se, m.cp, m.reps, u.bias, u.ese, u.se, u.cp
        ),
    }
}

fn spearman_is_minus_one(values: &[f64]) -> bool {
    // Against increasing r, ρ = −1 exactly when the values strictly decrease.
    values.windows(2).all(|w| w[1] < w[0])
}

// 4. MSE: OSP below UNIF, and decreasing in r for both methods.
fn mse_ordering(out: &ExperimentOutput) -> Verdict {
    let rs = &out.config.r;
    let mse = |m: Method| -> Vec<f64> { rs.iter().map(|&r| out.row(m, r, 0).expect("row").mse).collect() };
    let (osp, unif) = (mse(Method::Osp), mse(Method::Unif));
    let wins = osp.iter().zip(&unif).filter(|(o, u)| o < u).count();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" ");
    Verdict {
        pass: wins >= 3 && spearman_is_minus_one(&osp) && spearman_is_minus_one(&unif),
        detail: format!(
            "r = {rs:?}: MSE OSP [{}], UNIF [{}]; OSP < UNIF at {wins}/4 (need ≥ 3); strictly decreasing: OSP {}, UNIF {}",
            fmt(&osp),
            fmt(&unif),
            spearman_is_minus_one(&osp),
            spearman_is_minus_one(&unif)
        ),
    }
}

// 5. Case I, 60% censoring: coverage, and more variance than at 20%.
fn table_cr60(out60: &ExperimentOutput, out20: &ExperimentOutput) -> Verdict {
    let m = out60.row(Method::Osp, 800, 0).expect("row");
    let m20 = out20.row(Method::Osp, 800, 0).expect("row");
    Verdict {
        pass: in_range(m.cp, 0.92, 0.98) && m.ese > m20.ese,
        detail: format!(
            "OSP β₁ at r = 800: CP {:.3} (0.92–0.98), ESE {:.4} at 60% vs {:.4} at 20% (must be larger), bias {:+.4}, SE {:.4}",
            m.cp, m.ese, m20.ese, m.bias, m.se
        ),
    }
}

// 6. Heterogeneous covariates across sites: coverage at both censoring levels.
fn heterogeneous(out20: &ExperimentOutput, out60: &ExperimentOutput) -> Verdict {
    let a = out20.row(Method::Osp, 800, 0).expect("row");
    let b = out60.row(Method::Osp, 800, 0).expect("row");
    Verdict {
        pass: in_range(a.cp, 0.92, 0.98) && in_range(b.cp, 0.92, 0.98),
        detail: format!(
            "sites I/III/III/IV, OSP β₁ at r = 800: CP {:.3} at 20%, {:.3} at 60% (0.92–0.98); ESE/SE {:.3} and {:.3}",
            a.cp,
            b.cp,
            a.ese / a.se,
            b.ese / b.se
        ),
    }
}

// 7. Distance bound on every replicate of every experiment.
fn distance_bound(outs: &[&ExperimentOutput]) -> Verdict {
    let total: usize = outs.iter().map(|o| o.raw.len()).sum();
    let violations: usize = outs.iter().map(|o| o.bound_violations()).sum();
    Verdict {
        pass: total > 0 && violations == 0,
        detail: format!("‖β_DSE − β₀‖ ≤ K·max_k ‖β_k − β₀‖ held on {}/{total} aggregated estimates", total - violations),
    }
}

// 8. Single-thread timing at n = 10⁶, p = 5.
fn timing() -> Verdict {
    match run_timing(&TimingConfig::default(), &settings()) {
        Ok(rows) => {
            let secs = |m: TimedMethod| rows.iter().find(|r| r.method == m).expect("row").seconds;
            let (unif, osp, full) = (secs(TimedMethod::Unif), secs(TimedMethod::Osp), secs(TimedMethod::FullData));
            Verdict {
                pass: full >= 3.0 * osp && unif <= osp,
                detail: format!(
                    "mean of 3 runs: UNIF {unif:.4} s, OSP {osp:.4} s, full data {full:.4} s; full/OSP = {:.1}× (need ≥ 3), UNIF ≤ OSP",
                    full / osp
                ),
            }
        }
        Err(e) => failed(&e.to_string()),
    }
}

fn random_summary<R: Rng>(rng: &mut R, i: usize) -> SiteSummary {
    let p = rng.random_range(1..=6);
    let spd = |rng: &mut R| {
        let mut m = Matrix::identity(p).scaled(rng.random_range(1e-3..1.0));
        for _ in 0..p {
            let v: Vec<f64> = (0..p).map(|_| rng.random_range(-10.0..10.0)).collect();
            m.add_outer(rng.random_range(0.0..1.0), &v);
        }
        m.symmetrize();
        m
    };
    SiteSummary {
        site_id: format!("site-{i}"),
        n: rng.random_range(1..10_000_000),
        r: rng.random_range(1..10_000),
        beta: (0..p).map(|_| rng.random_range(-5.0..5.0) * 10f64.powi(rng.random_range(-8..3))).collect(),
        psi: spd(rng),
        gamma: spd(rng),
        delta: rng.random_range(0.0..=1.0),
        schema_version: 1,
    }
}

// 9. Summary codec and aggregation contracts.
fn federation_contracts() -> Verdict {
    let start = Instant::now();
    let mut rng = seed::stream(9, &[]);
    let summaries: Vec<SiteSummary> = (0..100).map(|i| random_summary(&mut rng, i)).collect();
    let exact = summaries
        .iter()
        .filter(|s| encode_summary(s).ok().and_then(|t| decode_summary(&t).ok()).as_ref() == Some(*s))
        .count();

    let mut perm_worst: f64 = 0.0;
    let mut fixed_point_exact = true;
    for trial in 0..50 {
        let p = 1 + trial % 5;
        let k = 2 + trial % 6;
        let sites: Vec<SiteSummary> = (0..k)
            .map(|i| {
                let mut s = random_summary(&mut rng, i);
                while s.p() != p {
                    s = random_summary(&mut rng, i);
                }
                s
            })
            .collect();
        let mut shuffled = sites.clone();
        for i in (1..k).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = aggregate(&sites).expect("aggregate");
        let b = aggregate(&shuffled).expect("aggregate");
        let scale = a.beta_dse.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.beta_dse.iter().zip(&b.beta_dse) {
            perm_worst = perm_worst.max((x - y).abs() / scale);
        }
        let copies = aggregate(&vec![sites[0].clone(); k]).expect("aggregate");
        fixed_point_exact &= copies.beta_dse == sites[0].beta;
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: exact == 100 && perm_worst <= 1e-12 && fixed_point_exact && secs < 5.0,
        detail: format!(
            "{exact}/100 summaries round-trip bit-exactly; permutation deviation {perm_worst:.1e} (tol 1e-12); \
             K identical summaries reproduce β exactly: {fixed_point_exact}; {secs:.2} s (limit 5 s)"
        ),
    }
}

// 10. Event-time law and censoring calibration.
fn data_laws() -> Verdict {
    let start = Instant::now();
    let n = 100_000;
    let mut rng = seed::stream(10, &[]);
    let mut times: Vec<f64> = (0..n)
        .map(|_| gen_event_time(&[0.0; 5], &DEFAULT_BETA0, &mut rng).expect("finite"))
        .collect();
    times.sort_by(f64::total_cmp);
    let ks = times.iter().enumerate().fold(0.0f64, |d, (i, &t)| {
        let f = 1.0 - (-0.25 * t * t).exp();
        d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
    });
    let critical = 1.6276 / (n as f64).sqrt();

    let mut rates = Vec::new();
    for target in [0.2, 0.6] {
        let case = CovariateCase::new(CaseTag::NormalEquiCorr, 5);
        let rate = calibrate_censoring(case, &DEFAULT_BETA0, target, &mut seed::stream(11, &[]), 0.01)
            .and_then(|c0| generate_dataset(case, &DEFAULT_BETA0, c0, n, &mut seed::stream(12, &[])))
            .map(|ds| ds.censoring_rate());
        rates.push((target, rate.map_err(|e| e.to_string())));
    }
    let rates_ok = rates
        .iter()
        .all(|(t, r)| r.as_ref().is_ok_and(|r| (r - t).abs() <= 0.01));
    let secs = start.elapsed().as_secs_f64();
    let shown: Vec<String> = rates
        .iter()
        .map(|(t, r)| match r {
            Ok(r) => format!("{r:.4} for target {t}"),
            Err(e) => format!("error for target {t}: {e}"),
        })
        .collect();
    Verdict {
        pass: ks < critical && rates_ok && secs < 60.0,
        detail: format!(
            "KS D = {ks:.5} vs 1% critical {critical:.5} (n = 10⁵); fresh-sample censoring {} (±0.01); {secs:.1} s (limit 60 s)",
            shown.join(", ")
        ),
    }
}

fn main() {
    let mut all = true;
    let timed = |f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        (v, start.elapsed())
    };

    let (v, t) = timed(&census_equivalence);
    all &= report(1, "census equivalence", t, &v);
    let (v, t) = timed(&gradient_check);
    all &= report(2, "gradient check", t, &v);

    let ex = run_all_experiments();
    let t20 = ex.elapsed[0];
    let v = match &ex.cr20 {
        Ok(o) => table_cr20(o),
        Err(e) => failed(e),
    };
    all &= report(3, "Case I, 20% censoring", t20, &v);
    let v = match &ex.cr20 {
        Ok(o) => mse_ordering(o),
        Err(e) => failed(e),
    };
    all &= report(4, "MSE ordering", t20, &v);
    let v = match (&ex.cr60, &ex.cr20) {
        (Ok(a), Ok(b)) => table_cr60(a, b),
        (Err(e), _) | (_, Err(e)) => failed(e),
    };
    all &= report(5, "Case I, 60% censoring", ex.elapsed[1], &v);
    let v = match (&ex.het20, &ex.het60) {
        (Ok(a), Ok(b)) => heterogeneous(a, b),
        (Err(e), _) | (_, Err(e)) => failed(e),
    };
    all &= report(6, "heterogeneous sites", ex.elapsed[2] + ex.elapsed[3], &v);
    let outs: Vec<&ExperimentOutput> = [&ex.cr20, &ex.cr60, &ex.het20, &ex.het60]
        .into_iter()
        .filter_map(|r| r.as_ref().ok())
        .collect();
    let v = if outs.len() == 4 {
        distance_bound(&outs)
    } else {
        failed("not every experiment completed")
    };
    all &= report(7, "distance bound", ex.elapsed.iter().sum(), &v);

    let (v, t) = timed(&timing);
    all &= report(8, "timing", t, &v);
    let (v, t) = timed(&federation_contracts);
    all &= report(9, "federation contracts", t, &v);
    let (v, t) = timed(&data_laws);
    all &= report(10, "data laws", t, &v);

    for (name, out) in [("CR 20%", &ex.cr20), ("CR 60%", &ex.cr60), ("heterogeneous 20%", &ex.het20), ("heterogeneous 60%", &ex.het60)] {
        if let Ok(o) = out {
            if !o.failures.is_empty() {
                println!("note: {name}: {} failed (method, r) fits, first: {}", o.failures.len(), o.failures[0].message);
            }
        }
    }
    if !all {
        std::process::exit(1);
    }
}
