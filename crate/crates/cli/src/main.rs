//! `ebm`: sample drivers, solve, run SGDo, and run the validation suites.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ebm_core::experiments::{
    asymptotic_bound_checks, bridge_max_validation, constants_audit, convergence_experiment, discrete_vs_continuous,
    emit_report, n_scaling_experiment, seminorm_refinement, tail_bound_check, Assertion, ExperimentConfig, ExperimentKind,
    Format, Named, Report, AUDIT_A, AUDIT_ALPHA,
};
use ebm_core::noise::csv::{write_bridge_csv, write_ebm_csv};
use ebm_core::noise::{sample_ebm, sample_epoched_bridge, EbmEpochs, SchemeSpec};
use ebm_core::objectives::predicted_limit_from_endpoint;
use ebm_core::rng::PathSeed;
use ebm_core::sgdo::{generate_regression, ols, run_sgdo, InputLaw, PermutationStream};
use ebm_core::young::{gradient_drift, solve_additive_streaming, Trajectory, TrajectoryMeta};
use ebm_core::Schedule;

#[derive(Parser)]
#[command(name = "ebm", version, about = "Epoched Brownian motion laboratory for shuffled SGD")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (sample, solve, sgdo) or directory (experiment, validate, audit).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid points per epoch (overrides the config's).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Replicate count (overrides the config's).
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Report format.
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv", "svg"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an epoched Brownian motion (or bridge) and write it as CSV.
    Sample {
        #[arg(long, default_value = "rr")]
        scheme: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        period: f64,
        /// Write the epoched bridge instead of the Brownian motion.
        #[arg(long)]
        bridge: bool,
    },
    /// Solve the continuous dynamics for one replicate of a convergence config.
    Solve {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Keep every k-th grid point (default: about 10^4 rows).
        #[arg(long)]
        every: Option<usize>,
    },
    /// Run SGDo on a synthetic regression problem and log iterates at geometric steps.
    Sgdo {
        #[arg(long, default_value = "rr")]
        scheme: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 0.7)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_eps: f64,
    },
    /// Run the suite described by a config file.
    Experiment { config: PathBuf },
    /// Run the bridge, tail, quadrature and constants suites.
    Validate,
    /// Recompute the printed constants of the rate bounds.
    Audit,
}

fn writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn out_dir(common: &Common, fallback: Option<&str>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| fallback.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Prints the assertions, writes the files, and returns whether all assertions passed.
fn finish(report: &dyn Report, format: Format, dir: &Path) -> Result<bool> {
    for a in report.assertions() {
        println!("{}", a.line());
    }
    for f in emit_report(report, format, dir)? {
        eprintln!("wrote {}", f.display());
    }
    Ok(report.assertions().iter().all(|a: &Assertion| a.passed))
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(g) = common.grid {
        cfg.steps_per_unit = g;
    }
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    let format: Format = common.format.parse()?;
    match cli.command {
        Command::Sample {
            scheme,
            dim,
            epochs,
            period,
            bridge,
        } => {
            let scheme: SchemeSpec = scheme.parse()?;
            let seed = PathSeed::new(common.seed.unwrap_or(0), 0);
            let grid = common.grid.unwrap_or(64);
            let mut w = writer(&common.out)?;
            if bridge {
                write_bridge_csv(&mut w, &sample_epoched_bridge(scheme, dim, epochs, grid, seed)?)?;
            } else {
                write_ebm_csv(&mut w, &sample_ebm(scheme, dim, epochs, grid, period, seed)?)?;
            }
            w.flush()?;
            Ok(true)
        }
        Command::Solve { config, replicate, every } => {
            let cfg = load_config(&config, common)?;
            if cfg.kind != ExperimentKind::Convergence {
                bail!("solve needs a convergence config");
            }
            let obj = cfg.objective_spec()?.build()?;
            let sigma = cfg.sigma_matrix()?;
            let schedule = cfg.schedule()?;
            let seed = PathSeed::new(cfg.seed, replicate as u64);
            let mut driver = EbmEpochs::new(cfg.scheme, sigma.ncols(), cfg.steps_per_unit, cfg.period, seed)?;
            let limit = predicted_limit_from_endpoint(obj.as_ref(), &sigma, cfg.period, &driver.endpoint())?;
            let y0 = cfg.initial.clone().unwrap_or_else(|| limit.as_slice().to_vec());
            let epochs = (cfg.horizon / cfg.period - 1e-9).ceil() as usize;
            let total = epochs * cfg.steps_per_unit;
            let every = every.unwrap_or_else(|| total.div_ceil(10_000)).max(1);
            let (mut times, mut states) = (Vec::new(), Vec::new());
            solve_additive_streaming(gradient_drift(obj.as_ref(), schedule), schedule, &sigma, &mut driver, epochs, &y0, |k, t, y| {
                if k % every == 0 || k == total {
                    times.push(t);
                    states.extend_from_slice(y);
                }
            })?;
            let meta = TrajectoryMeta {
                schedule: Some(schedule),
                driver: format!("ebm-{}", cfg.scheme),
                step: cfg.period / cfg.steps_per_unit as f64,
                solver: "euler-young".into(),
            };
            let traj = Trajectory::new(times, y0.len(), states, meta)?;
            let mut w = writer(&common.out)?;
            traj.write_csv(&mut w, Some(limit.as_slice()))?;
            w.flush()?;
            Ok(true)
        }
        Command::Sgdo {
            scheme,
            samples,
            dim,
            h,
            beta,
            c,
            epochs,
            sigma_eps,
        } => {
            let scheme: SchemeSpec = scheme.parse()?;
            let seed = PathSeed::new(common.seed.unwrap_or(0), 0);
            let theta_star: Vec<f64> = (0..dim).map(|k| 1.0 / (k + 1) as f64).collect();
            let data = generate_regression(samples, &theta_star, sigma_eps, &InputLaw::StandardGaussian, seed)?;
            let theta_hat = ols(&data)?;
            let stream = PermutationStream::new(scheme, samples, seed)?;
            let schedule = Schedule::new(beta, c)?;
            let run = run_sgdo(&data, &stream, schedule, h, epochs, &vec![0.0; dim], 10f64.powf(1.0 / 16.0))?;
            let mut w = writer(&common.out)?;
            run.to_trajectory(schedule, &format!("sgdo-{scheme}"))?
                .write_csv(&mut w, Some(theta_hat.as_slice()))?;
            w.flush()?;
            Ok(true)
        }
        Command::Experiment { config } => {
            let cfg = load_config(&config, common)?;
            let dir = out_dir(common, cfg.out.as_deref());
            match cfg.kind {
                ExperimentKind::Convergence => finish(&convergence_experiment(&cfg)?, format, &dir),
                ExperimentKind::Scaling => finish(&n_scaling_experiment(&cfg)?, format, &dir),
                ExperimentKind::Coherence => finish(&discrete_vs_continuous(&cfg)?, format, &dir),
            }
        }
        Command::Validate => {
            let dir = out_dir(common, None);
            let seed = common.seed.unwrap_or(0);
            let reps = common.replicates.unwrap_or(100);
            let grid = common.grid.unwrap_or(64);
            let mut ok = true;
            let tail = tail_bound_check(AUDIT_ALPHA, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0], 1000 * reps, grid, seed)?;
            ok &= finish(&Named { name: "tail".into(), report: &tail }, format, &dir)?;
            let max = bridge_max_validation(AUDIT_ALPHA, AUDIT_A, 10_000, reps, 100, grid, seed)?;
            ok &= finish(&Named { name: "bridge-max".into(), report: &max }, format, &dir)?;
            let refine = seminorm_refinement(AUDIT_ALPHA, 1 << 13, 32, seed)?;
            ok &= finish(&Named { name: "refinement".into(), report: &refine }, format, &dir)?;
            let quad = asymptotic_bound_checks(Schedule::new(0.5, 1.0)?, 1.0, &[1.0], &[1e2, 1e3, 1e4])?;
            ok &= finish(&Named { name: "integrals".into(), report: &quad }, format, &dir)?;
            ok &= audit(format, &dir)?;
            Ok(ok)
        }
        Command::Audit => audit(format, &out_dir(common, None)),
    }
}

fn audit(format: Format, dir: &Path) -> Result<bool> {
    let report = constants_audit();
    for r in &report.rows {
        let printed = r.printed.map(|p| format!("{p}")).unwrap_or_else(|| "-".into());
        let flag = if r.flagged { "  <- differs" } else { "" };
        println!("{:<55} {:>12.6} {:>10}{flag}", r.quantity, r.recomputed, printed);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    finish(&Named { name: "audit".into(), report: &report }, format, dir)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
