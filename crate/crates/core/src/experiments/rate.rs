//! Convergence-rate experiments for the continuous dynamics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::assertion::Assertion;
use super::config::{ErrorMeasure, ExperimentConfig, ExperimentKind};
use super::fit::{geometric_checkpoints, loglog_fit, median, LinearFit, CHECKPOINT_RATIO};
use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::{holder_seminorm_uniform, BridgeEpochs, EbmEpochs, PairSet};
use crate::objectives::{predicted_limit_from_endpoint, Objective};
use crate::rng::PathSeed;
use crate::young::{gradient_drift, sewing_constant, solve_additive_streaming};

/// Leading constant of the rate envelope.
pub const RATE_GAIN: f64 = 4.7;
/// Additive constant of the rate envelope.
pub const RATE_OFFSET: f64 = 1.2;

/// Curvature and noise constants entering the envelopes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub lambda: f64,
    pub smoothness: f64,
    pub sigma_norm: f64,
}

impl ProblemConstants {
    pub fn new(obj: &dyn Objective, sigma: &DMatrix<f64>) -> Self {
        let c = obj.constants();
        Self {
            lambda: c.lambda,
            smoothness: c.smoothness,
            sigma_norm: linalg::op_norm(sigma),
        }
    }
}

/// `T^{1/2-beta} |sigma| (4.7 L/lambda + 1.2) c^{-beta} sqrt(log n) / n^beta` with `n = t / T`.
pub fn rate_envelope(k: &ProblemConstants, period: f64, beta: f64, c: f64, t: f64) -> f64 {
    let n = t / period;
    let lead = RATE_GAIN * k.smoothness / k.lambda + RATE_OFFSET;
    period.powf(0.5 - beta) * k.sigma_norm * lead * c.powf(-beta) * n.ln().max(0.0).sqrt() * n.powf(-beta)
}

/// `C_alpha T^{1/2-beta} |sigma| (K(alpha, 1) L/lambda + 1) / n^beta` with `n = t / T`.
pub fn finite_epoch_envelope(k: &ProblemConstants, c_alpha: f64, alpha: f64, period: f64, beta: f64, t: f64) -> Result<f64> {
    let n = t / period;
    let lead = sewing_constant(alpha, 1.0)? * k.smoothness / k.lambda + 1.0;
    Ok(c_alpha * period.powf(0.5 - beta) * k.sigma_norm * lead * n.powf(-beta))
}

/// Pointwise and last-window errors at a set of step indices.
#[derive(Clone, Debug)]
pub(crate) struct ErrorTracker {
    targets: Vec<usize>,
    ring: Vec<f64>,
    next: usize,
    pub pointwise: Vec<f64>,
    pub window_sup: Vec<f64>,
}

impl ErrorTracker {
    /// `targets` strictly increasing; the window covers the last `window` steps.
    pub fn new(targets: Vec<usize>, window: usize) -> Self {
        Self {
            targets,
            ring: vec![0.0; window.max(1)],
            next: 0,
            pointwise: Vec::new(),
            window_sup: Vec::new(),
        }
    }

    pub fn observe(&mut self, k: usize, error: f64) {
        let w = self.ring.len();
        self.ring[k % w] = error;
        if self.next < self.targets.len() && self.targets[self.next] == k {
            self.pointwise.push(error);
            self.window_sup.push(self.ring.iter().fold(0.0, |a: f64, b| a.max(*b)));
            self.next += 1;
        }
    }

    pub fn complete(&self) -> bool {
        self.next == self.targets.len()
    }
}

/// Checkpoint times from one period to the horizon, snapped to grid indices.
pub(crate) fn checkpoint_steps(first: f64, horizon: f64, dt: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut steps: Vec<usize> = Vec::new();
    for t in geometric_checkpoints(first, horizon, CHECKPOINT_RATIO)? {
        let k = (t / dt).round() as usize;
        if steps.last() != Some(&k) && k > 0 {
            steps.push(k);
        }
    }
    let times = steps.iter().map(|&k| k as f64 * dt).collect();
    Ok((steps, times))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: f64,
    pub error: f64,
    pub error_sup: f64,
    pub envelope: f64,
    /// Envelope for schemes with finitely many distinct epochs.
    pub finite_envelope: Option<f64>,
}

impl Checkpoint {
    pub fn measured(&self, measure: ErrorMeasure) -> f64 {
        match measure {
            ErrorMeasure::Pointwise => self.error,
            ErrorMeasure::EpochSup => self.error_sup,
        }
    }
}

/// Slopes over the fit window for one error measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFits {
    pub raw: LinearFit,
    /// After dividing out `sqrt(log n)`.
    pub corrected: LinearFit,
    /// `|slope|` change of the raw fit when the window moves half a decade earlier.
    pub window_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub limit: Vec<f64>,
    /// `max_j ||B^j||_alpha` over the distinct epochs, when finitely many.
    pub c_alpha: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub pointwise: Option<RateFits>,
    pub epoch_sup: Option<RateFits>,
    /// Solver or fitting failure; the replicate is then excluded from passes.
    pub failure: Option<String>,
}

impl ReplicateResult {
    pub fn fits(&self, measure: ErrorMeasure) -> Option<&RateFits> {
        match measure {
            ErrorMeasure::Pointwise => self.pointwise.as_ref(),
            ErrorMeasure::EpochSup => self.epoch_sup.as_ref(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub constants: ProblemConstants,
    pub replicates: Vec<ReplicateResult>,
    pub assertions: Vec<Assertion>,
}

impl RateReport {
    /// Median over replicates of the raw and the `sqrt(log n)`-corrected slope.
    pub fn median_slopes(&self) -> (f64, f64) {
        let fits: Vec<&RateFits> = self.replicates.iter().filter_map(|r| r.fits(self.config.error)).collect();
        let raw: Vec<f64> = fits.iter().map(|f| f.raw.slope).collect();
        let corrected: Vec<f64> = fits.iter().map(|f| f.corrected.slope).collect();
        (median(&raw), median(&corrected))
    }

    /// Does the checkpoint satisfy the envelope the report is judged by?
    pub fn checkpoint_passes(&self, c: &Checkpoint) -> bool {
        let e = c.measured(self.config.error);
        let bound = c.finite_envelope.unwrap_or(c.envelope);
        e <= self.config.margin * bound
    }
}

fn fit_window(times: &[f64], errors: &[f64], period: f64, lo: f64, hi: f64) -> Result<LinearFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in times.iter().zip(errors) {
        let n = t / period;
        if t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12) && n > 1.0 {
            xs.push(t);
            ys.push(e);
        }
    }
    if xs.len() < 3 {
        return Err(Error::param("fit_decades", format!("only {} checkpoints in [{lo}, {hi}]", xs.len())));
    }
    loglog_fit(&xs, &ys)
}

pub(crate) fn rate_fits(times: &[f64], errors: &[f64], period: f64, horizon: f64, decades: f64) -> Result<RateFits> {
    let lo = horizon * 10f64.powf(-decades);
    let raw = fit_window(times, errors, period, lo, horizon)?;
    let corrected_err: Vec<f64> = times
        .iter()
        .zip(errors)
        .map(|(t, e)| e / (t / period).ln().max(f64::MIN_POSITIVE).sqrt())
        .collect();
    let corrected = fit_window(times, &corrected_err, period, lo, horizon)?;
    let shift = 10f64.powf(-0.5);
    let shifted = fit_window(times, errors, period, lo * shift, horizon * shift)?;
    Ok(RateFits {
        raw,
        corrected,
        window_shift: (shifted.slope - raw.slope).abs(),
    })
}

/// `max_j ||B^j||_alpha` over the first `epochs` bridges of the stream with this seed.
pub fn bridge_seminorm_max(cfg: &ExperimentConfig, dim: usize, seed: PathSeed, epochs: usize) -> Result<f64> {
    let mut bridges = BridgeEpochs::new(cfg.scheme, dim, cfg.steps_per_unit, seed)?;
    let dt = 1.0 / cfg.steps_per_unit as f64;
    let mut best = 0.0f64;
    for _ in 0..epochs {
        let b = bridges.next_epoch()?;
        best = best.max(holder_seminorm_uniform(b, dim, dt, cfg.alpha, PairSet::Exhaustive)?);
    }
    Ok(best)
}

/// One replicate of the continuous dynamics, streamed epoch by epoch.
pub fn run_replicate(cfg: &ExperimentConfig, obj: &dyn Objective, sigma: &DMatrix<f64>, replicate: usize) -> Result<ReplicateResult> {
    let k = ProblemConstants::new(obj, sigma);
    let schedule = cfg.schedule()?;
    let seed = PathSeed::new(cfg.seed, replicate as u64);
    let mut driver = EbmEpochs::new(cfg.scheme, sigma.ncols(), cfg.steps_per_unit, cfg.period, seed)?;
    let limit = predicted_limit_from_endpoint(obj, sigma, cfg.period, &driver.endpoint())?;
    let y0 = cfg.initial.clone().unwrap_or_else(|| limit.as_slice().to_vec());
    let epochs = (cfg.horizon / cfg.period - 1e-9).ceil() as usize;
    let dt = cfg.period / cfg.steps_per_unit as f64;
    let (steps, times) = checkpoint_steps(cfg.period, cfg.horizon, dt)?;
    let mut tracker = ErrorTracker::new(steps, cfg.steps_per_unit);
    let c_alpha = match cfg.scheme.distinct_epochs() {
        Some(j) => Some(bridge_seminorm_max(cfg, sigma.ncols(), seed, j)?),
        None => None,
    };
    let mut result = ReplicateResult {
        replicate,
        limit: limit.as_slice().to_vec(),
        c_alpha,
        checkpoints: Vec::new(),
        pointwise: None,
        epoch_sup: None,
        failure: None,
    };
    let lim = limit.as_slice();
    let solved = solve_additive_streaming(gradient_drift(obj, schedule), schedule, sigma, &mut driver, epochs, &y0, |step, _, y| {
        let e2: f64 = y.iter().zip(lim).map(|(a, b)| (a - b) * (a - b)).sum();
        tracker.observe(step, e2.sqrt());
    });
    if let Err(e) = solved {
        result.failure = Some(e.to_string());
        return Ok(result);
    }
    debug_assert!(tracker.complete());
    for (i, &t) in times.iter().enumerate() {
        let finite_envelope = match c_alpha {
            Some(ca) => Some(finite_epoch_envelope(&k, ca, cfg.alpha, cfg.period, cfg.beta, t)?),
            None => None,
        };
        result.checkpoints.push(Checkpoint {
            t,
            error: tracker.pointwise[i],
            error_sup: tracker.window_sup[i],
            envelope: rate_envelope(&k, cfg.period, cfg.beta, cfg.c, t),
            finite_envelope,
        });
    }
    match (
        rate_fits(&times, &tracker.pointwise, cfg.period, cfg.horizon, cfg.fit_decades),
        rate_fits(&times, &tracker.window_sup, cfg.period, cfg.horizon, cfg.fit_decades),
    ) {
        (Ok(p), Ok(s)) => {
            result.pointwise = Some(p);
            result.epoch_sup = Some(s);
        }
        (Err(e), _) | (_, Err(e)) => result.failure = Some(e.to_string()),
    }
    Ok(result)
}

fn problem(cfg: &ExperimentConfig) -> Result<(Box<dyn Objective>, DMatrix<f64>)> {
    let obj = cfg.objective_spec()?.build()?;
    let sigma = cfg.sigma_matrix()?;
    Ok((obj, sigma))
}

/// Replicates of the continuous dynamics with rate fits and envelope checks.
pub fn convergence_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let (obj, sigma) = problem(cfg)?;
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, obj.as_ref(), &sigma, r))
        .collect::<Result<Vec<_>>>()?;
    let mut report = RateReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        constants: ProblemConstants::new(obj.as_ref(), &sigma),
        replicates,
        assertions: Vec::new(),
    };
    report.assertions = rate_assertions(&report);
    Ok(report)
}

fn rate_assertions(report: &RateReport) -> Vec<Assertion> {
    let cfg = &report.config;
    let total = report.replicates.len();
    let ok: Vec<&ReplicateResult> = report.replicates.iter().filter(|r| r.failure.is_none()).collect();
    let mut out = Vec::new();
    let failed: Vec<usize> = report.replicates.iter().filter(|r| r.failure.is_some()).map(|r| r.replicate).collect();
    out.push(Assertion::new(
        "replicates completed",
        failed.is_empty(),
        format!("{} of {total} completed; failed replicates {failed:?}", ok.len()),
    ));
    let in_band = ok
        .iter()
        .filter(|r| {
            r.fits(cfg.error)
                .is_some_and(|f| (f.raw.slope + cfg.beta).abs() <= cfg.slope_tolerance)
        })
        .count();
    let (raw, corrected) = report.median_slopes();
    let mut a = Assertion::fraction("rate slope", in_band, total, cfg.pass_fraction);
    a.detail = format!(
        "{}; slope within {} of -beta = {}, median {raw:.4} (sqrt-log corrected {corrected:.4})",
        a.detail, cfg.slope_tolerance, -cfg.beta
    );
    out.push(a);
    let sensitive: Vec<usize> = ok
        .iter()
        .filter(|r| r.fits(cfg.error).is_some_and(|f| f.window_shift >= 0.05))
        .map(|r| r.replicate)
        .collect();
    out.push(Assertion::new(
        "window stability",
        true,
        format!("window-sensitive replicates (slope shift >= 0.05 over half a decade): {sensitive:?}"),
    ));
    let finite = cfg.scheme.distinct_epochs().is_some();
    if finite {
        let mut violations = Vec::new();
        let passing = ok
            .iter()
            .filter(|r| {
                let bad: Vec<f64> = r
                    .checkpoints
                    .iter()
                    .filter(|c| c.t >= cfg.envelope_from && !report.checkpoint_passes(c))
                    .map(|c| c.t)
                    .collect();
                if !bad.is_empty() {
                    violations.push((r.replicate, bad));
                }
                violations.last().is_none_or(|v| v.0 != r.replicate)
            })
            .count();
        let mut a = Assertion::fraction("finite-epoch envelope", passing, total, cfg.pass_fraction);
        a.detail = format!("{}; margin {}, t >= {}; violations {violations:?}", a.detail, cfg.margin, cfg.envelope_from);
        out.push(a);
    } else {
        let passing = ok
            .iter()
            .filter(|r| {
                r.checkpoints
                    .last()
                    .is_some_and(|c| c.measured(cfg.error) <= cfg.margin * c.envelope)
            })
            .count();
        let mut a = Assertion::fraction("final residual envelope", passing, total, cfg.pass_fraction);
        a.detail = format!("{}; margin {}", a.detail, cfg.margin);
        out.push(a);
    }
    out
}

/// Prefactors across periods `T` and their fitted growth exponent.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub periods: Vec<f64>,
    /// Median over replicates of `median_t e(t) n^beta / sqrt(log n)`, `n = t / T`.
    pub epoch_prefactors: Vec<f64>,
    /// Same in physical time: `median_t e(t) t^beta / sqrt(log t)`.
    pub time_prefactors: Vec<f64>,
    pub epoch_fit: LinearFit,
    pub time_fit: LinearFit,
    pub target: f64,
    pub assertions: Vec<Assertion>,
}

/// Runs the convergence experiment at each period of `[scaling]` and fits
/// log-prefactor against log `T`.
pub fn n_scaling_experiment(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let s = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Config("scaling experiment needs a [scaling] section".into()))?;
    let mut periods = s.periods.clone();
    periods.sort_by(f64::total_cmp);
    periods.dedup();
    if periods.len() < 4 || periods.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("scaling needs at least 4 distinct positive periods".into()));
    }
    if (periods[periods.len() - 1] / periods[0]).log10() < 1.5 {
        return Err(Error::Config("periods must span at least 1.5 decades".into()));
    }
    let (obj, sigma) = problem(cfg)?;
    let mut epoch_prefactors = Vec::new();
    let mut time_prefactors = Vec::new();
    for &period in &periods {
        let mut sub = cfg.clone();
        sub.kind = ExperimentKind::Convergence;
        sub.period = period;
        sub.horizon = period * s.epochs as f64;
        let lo = sub.horizon * 10f64.powf(-cfg.fit_decades);
        let reps = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(&sub, obj.as_ref(), &sigma, r))
            .collect::<Result<Vec<_>>>()?;
        let mut ep = Vec::new();
        let mut tp = Vec::new();
        for r in reps.iter().filter(|r| r.failure.is_none()) {
            let late: Vec<&Checkpoint> = r.checkpoints.iter().filter(|c| c.t >= lo * (1.0 - 1e-12)).collect();
            let e_n: Vec<f64> = late
                .iter()
                .map(|c| {
                    let n = c.t / period;
                    c.measured(cfg.error) * n.powf(cfg.beta) / n.ln().sqrt()
                })
                .collect();
            let e_t: Vec<f64> = late
                .iter()
                .map(|c| c.measured(cfg.error) * c.t.powf(cfg.beta) / c.t.ln().sqrt())
                .collect();
            ep.push(median(&e_n));
            tp.push(median(&e_t));
        }
        if ep.is_empty() {
            return Err(Error::Config(format!("every replicate failed at T = {period}")));
        }
        epoch_prefactors.push(median(&ep));
        time_prefactors.push(median(&tp));
    }
    let epoch_fit = loglog_fit(&periods, &epoch_prefactors)?;
    let time_fit = loglog_fit(&periods, &time_prefactors)?;
    let target = 0.5 - cfg.beta;
    let assertions = vec![Assertion::new(
        "prefactor scaling",
        (epoch_fit.slope - target).abs() <= cfg.slope_tolerance,
        format!(
            "epoch-time slope {:.4} vs 1/2 - beta = {target:.4} (tolerance {}); physical-time slope {:.4}",
            epoch_fit.slope, cfg.slope_tolerance, time_fit.slope
        ),
    )];
    Ok(ScalingReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        periods,
        epoch_prefactors,
        time_prefactors,
        epoch_fit,
        time_fit,
        target,
        assertions,
    })
}
