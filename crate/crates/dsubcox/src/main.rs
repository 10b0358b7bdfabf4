use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dsubcox::config::{apply_seed_override, load_config, render_config, SEED_ENV};
use dsubcox::core::cox::full_data_fit;
use dsubcox::core::datagen::{CaseTag, SimConfig, SimDesign};
use dsubcox::core::seed::{self, tag};
use dsubcox::core::subsample::{two_step_fit, SiteMethod};
use dsubcox::core::{aggregate, wald_interval, EstimationSettings, Matrix, TwoStepConfig};
use dsubcox::csv_io::{ingest_csv, write_dataset_file};
use dsubcox::error::{HarnessError, Result};
use dsubcox::experiment::run_experiment;
use dsubcox::report::{emit_reports, write_timing};
use dsubcox::summary_file::{read_summary_file, write_summary_file};
use dsubcox::timing::{run_timing, TimingConfig};

#[derive(Parser)]
#[command(name = "dsubcox", version, about = "Distributed optimal subsampling for Cox regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Osp,
    Unif,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated site datasets as CSV files `site-<k>.csv`.
    Gen {
        /// Simulation config (`key = value` lines); defaults to Case I, four sites.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replicate index to generate.
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one site by two-step subsampling and write its summary file.
    FitSite {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "site-1")]
        site_id: String,
        #[arg(long, default_value_t = 200)]
        r0: usize,
        #[arg(long, default_value_t = 800)]
        r: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Osp)]
        method: MethodArg,
    },
    /// Combine site summary files into the distributed estimate.
    Aggregate {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Fit the full dataset by Newton–Raphson.
    FitFull {
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a Monte Carlo experiment and write `<prefix>metrics.csv` and `<prefix>raw.csv`.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Time UNIF, OSP and the full-data fit on one thread.
    Timing {
        #[arg(long, default_value_t = 1_000_000)]
        n_total: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        /// Output CSV; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn seed_from_env(mut seed: u64) -> Result<u64> {
    apply_seed_override(&mut seed, std::env::var(SEED_ENV).ok().as_deref())?;
    Ok(seed)
}

fn print_vector(label: &str, v: &[f64]) {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    println!("{label}: {}", cells.join(" "));
}

fn print_fit_table(beta: &[f64], cov: &Matrix) {
    let se: Vec<f64> = cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect();
    println!("{:>6} {:>12} {:>12}", "coef", "estimate", "std.err");
    for (j, (b, s)) in beta.iter().zip(&se).enumerate() {
        println!("{:>6} {:>12.6} {:>12.6}", format!("x{}", j + 1), b, s);
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = EstimationSettings::default();
    match cli.command {
        Command::Gen { config, replicate, out } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => {
                    let mut cfg = SimConfig::homogeneous(CaseTag::NormalEquiCorr, 4, dsubcox::config::DEFAULT_BETA0.to_vec());
                    cfg.master_seed = seed_from_env(cfg.master_seed)?;
                    cfg
                }
            };
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            let design = SimDesign::new(cfg.clone()).map_err(|e| HarnessError::numerical("censoring calibration", e))?;
            for site in 0..cfg.k {
                let ds = design
                    .site_dataset(site, replicate)
                    .map_err(|e| HarnessError::numerical("data generation", e))?;
                let path = out.join(format!("site-{}.csv", site + 1));
                write_dataset_file(&ds, &path)?;
                println!("{}: n={} censoring={:.3}", path.display(), ds.n(), ds.censoring_rate());
            }
            let cfg_path = out.join("config.txt");
            std::fs::write(&cfg_path, render_config(&cfg)).map_err(|e| HarnessError::io(&cfg_path, e))?;
        }
        Command::FitSite {
            data,
            out,
            site_id,
            r0,
            r,
            delta,
            seed,
            method,
        } => {
            let ds = ingest_csv(&data)?;
            let method = match method {
                MethodArg::Osp => SiteMethod::Optimal,
                MethodArg::Unif => SiteMethod::Uniform,
            };
            let cfg = TwoStepConfig::new(site_id, r0, r, delta, method);
            let mut rng = seed::stream(seed_from_env(seed)?, &[tag::CLI]);
            let summary = two_step_fit(&ds, &cfg, &mut rng, &settings)
                .map_err(|e| HarnessError::numerical(format!("fitting {}", data.display()), e))?;
            write_summary_file(&summary, &out)?;
            println!("site {} (n={}, r={}) -> {}", summary.site_id, summary.n, summary.r, out.display());
            print_vector("beta", &summary.beta);
        }
        Command::Aggregate { summaries, level } => {
            let loaded = summaries.iter().map(|p| read_summary_file(p)).collect::<Result<Vec<_>>>()?;
            let est = aggregate(&loaded).map_err(|e| HarnessError::numerical("aggregation", e))?;
            let cis = wald_interval(&est, level).map_err(|e| HarnessError::numerical("confidence intervals", e))?;
            println!("sites: {}  total r: {}", est.k, est.total_r);
            println!(
                "{:>6} {:>12} {:>12} {:>12} {:>12}",
                "coef",
                "estimate",
                "std.err",
                format!("{:.1}% lower", 100.0 * level),
                "upper"
            );
            for (ci, se) in cis.iter().zip(est.standard_errors()) {
                println!(
                    "{:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                    format!("x{}", ci.coefficient + 1),
                    est.beta_dse[ci.coefficient],
                    se,
                    ci.lower,
                    ci.upper
                );
            }
        }
        Command::FitFull { data } => {
            let ds = ingest_csv(&data)?;
            let fit = full_data_fit(&ds, &settings).map_err(|e| HarnessError::numerical("full-data fit", e))?;
            if !fit.converged {
                return Err(HarnessError::numerical(
                    "full-data fit",
                    dsubcox::core::Error::NotConverged {
                        stage: dsubcox::core::error::FitStage::Main,
                        iterations: fit.iterations,
                        beta: fit.beta,
                    },
                ));
            }
            let cov = fit
                .information
                .cholesky(1e-12, None)
                .map_err(|e| HarnessError::numerical("inverting information", e))?
                .solve_matrix(&Matrix::identity(ds.p()));
            println!("n={} events={} iterations={}", ds.n(), ds.event_count(), fit.iterations);
            print_fit_table(&fit.beta, &cov);
        }
        Command::Experiment { config, out, threads } => {
            let cfg = load_config(&config)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| HarnessError::Usage(e.to_string()))?;
            let output = pool.install(|| run_experiment(&cfg, &settings))?;
            let (metrics, raw) = emit_reports(&output.rows, &output.raw, cfg.p(), &out)?;
            println!(
                "{} replicates, {} failed cells, {} bound violations",
                cfg.replications,
                output.failures.len(),
                output.bound_violations()
            );
            println!("wrote {} and {}", metrics.display(), raw.display());
        }
        Command::Timing {
            n_total,
            k,
            repeats,
            seed,
            out,
        } => {
            let cfg = TimingConfig {
                n_total,
                k,
                repeats,
                master_seed: seed_from_env(seed)?,
                ..TimingConfig::default()
            };
            let rows = run_timing(&cfg, &settings)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
                    write_timing(&rows, f).map_err(|e| HarnessError::io(&path, e))?;
                }
                None => write_timing(&rows, std::io::stdout()).map_err(|e| HarnessError::io("stdout", e))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
