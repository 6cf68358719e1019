//! Regression checks: the limit law, OLS moments, and discrete-continuous coherence.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::assertion::Assertion;
use super::config::{ExperimentConfig, ExperimentKind};
use super::fit::median;
use super::rate::{checkpoint_steps, rate_fits, ErrorTracker, RateFits};
use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::{drift_gaussian, EbmEpochs};
use crate::objectives::{predicted_limit_from_endpoint, QuadraticObjective};
use crate::rng::PathSeed;
use crate::schedule::Schedule;
use crate::sgdo::{generate_regression, ols, run_one_pass, run_sgdo_observed, InputLaw, PermutationStream};
use crate::young::{gradient_drift, solve_additive_streaming};

/// Standard errors allowed in moment comparisons.
pub const MOMENT_Z: f64 = 4.0;

/// `E[x x^T]` of the input law.
pub fn population_second_moment(law: &InputLaw, dim: usize) -> Result<DMatrix<f64>> {
    match law {
        InputLaw::StandardGaussian => Ok(DMatrix::identity(dim, dim)),
        InputLaw::Gaussian { covariance } => {
            let k = linalg::matrix_from_rows(covariance)?;
            if k.nrows() != dim {
                return Err(Error::param("covariance", format!("{}x{} for d = {dim}", k.nrows(), k.ncols())));
            }
            linalg::spd_eigen(&k)?;
            Ok(k)
        }
    }
}

/// `(sigma_eps^2 / N) kappa^{-1}`.
pub fn limit_covariance(kappa: &DMatrix<f64>, sigma_eps: f64, samples: usize) -> Result<DMatrix<f64>> {
    Ok(linalg::spd_inverse(kappa)? * (sigma_eps * sigma_eps / samples as f64))
}

/// Sample mean and covariance (divisor `n - 1`) of row vectors.
pub fn sample_moments(samples: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += DVector::from_column_slice(s);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = DVector::from_column_slice(s) - &mean;
        cov += &c * c.transpose();
    }
    (mean, cov / (n - 1.0))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Mean and covariance of Gaussian samples against a target, entry by entry in
/// standard-error units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub draws: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub target_mean: Vec<f64>,
    pub target_covariance: Vec<Vec<f64>>,
    /// `(mean_i - target_i) / sqrt(Sigma_ii / n)`.
    pub mean_z: Vec<f64>,
    /// `(S_ij - Sigma_ij) / sqrt((Sigma_ii Sigma_jj + Sigma_ij^2) / n)`, row-major upper triangle.
    pub covariance_z: Vec<f64>,
    pub max_z: f64,
}

impl MomentCheck {
    pub fn against(samples: &[Vec<f64>], target_mean: &DVector<f64>, target_cov: &DMatrix<f64>) -> Self {
        let (mean, cov) = sample_moments(samples);
        let n = samples.len() as f64;
        let d = mean.len();
        let mean_z: Vec<f64> = (0..d)
            .map(|i| (mean[i] - target_mean[i]) / (target_cov[(i, i)] / n).sqrt())
            .collect();
        let mut covariance_z = Vec::new();
        for i in 0..d {
            for j in i..d {
                let var = (target_cov[(i, i)] * target_cov[(j, j)] + target_cov[(i, j)].powi(2)) / n;
                covariance_z.push((cov[(i, j)] - target_cov[(i, j)]) / var.sqrt());
            }
        }
        let max_z = mean_z.iter().chain(&covariance_z).fold(0.0f64, |a, z| a.max(z.abs()));
        Self {
            draws: samples.len(),
            mean: mean.as_slice().to_vec(),
            covariance: rows(&cov),
            target_mean: target_mean.as_slice().to_vec(),
            target_covariance: rows(target_cov),
            mean_z,
            covariance_z,
            max_z,
        }
    }

    /// Two independent samples; the second plays the target, standard errors pool both.
    pub fn two_sample(a: &[Vec<f64>], b: &[Vec<f64>]) -> Self {
        let (mb, cb) = sample_moments(b);
        let mut check = Self::against(a, &mb, &cb);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let d = mb.len();
        let ca = linalg::matrix_from_rows(&check.covariance).expect("square");
        check.mean_z = (0..d)
            .map(|i| (check.mean[i] - mb[i]) / (ca[(i, i)] / na + cb[(i, i)] / nb).sqrt())
            .collect();
        check.covariance_z.clear();
        for i in 0..d {
            for j in i..d {
                let va = (ca[(i, i)] * ca[(j, j)] + ca[(i, j)].powi(2)) / na;
                let vb = (cb[(i, i)] * cb[(j, j)] + cb[(i, j)].powi(2)) / nb;
                check.covariance_z.push((ca[(i, j)] - cb[(i, j)]) / (va + vb).sqrt());
            }
        }
        check.max_z = check.mean_z.iter().chain(&check.covariance_z).fold(0.0f64, |a, z| a.max(z.abs()));
        check
    }

    pub fn passes(&self) -> bool {
        self.max_z <= MOMENT_Z
    }
}

/// The regression problem in continuous form: population quadratic, `sigma = sqrt(h sigma_eps^2 kappa)`, `T = N h`.
#[derive(Clone, Debug)]
pub struct RegressionModel {
    pub kappa: DMatrix<f64>,
    pub theta_star: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub period: f64,
    pub samples: usize,
    pub sigma_eps: f64,
}

impl RegressionModel {
    pub fn new(samples: usize, h: f64, sigma_eps: f64, theta_star: &[f64], law: &InputLaw) -> Result<Self> {
        if !(h > 0.0 && sigma_eps >= 0.0) || samples == 0 {
            return Err(Error::param("h", "need h > 0, sigma_eps >= 0 and N >= 1"));
        }
        let kappa = population_second_moment(law, theta_star.len())?;
        let sigma = if sigma_eps > 0.0 {
            linalg::spd_sqrt(&(&kappa * (h * sigma_eps * sigma_eps)))?
        } else {
            DMatrix::zeros(kappa.nrows(), kappa.ncols())
        };
        Ok(Self {
            theta_star: DVector::from_column_slice(theta_star),
            kappa,
            sigma,
            period: samples as f64 * h,
            samples,
            sigma_eps,
        })
    }

    pub fn objective(&self) -> Result<QuadraticObjective> {
        QuadraticObjective::new(self.kappa.clone(), self.theta_star.clone())
    }

    pub fn limit_covariance(&self) -> Result<DMatrix<f64>> {
        limit_covariance(&self.kappa, self.sigma_eps, self.samples)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitLawReport {
    pub samples: usize,
    pub limit: MomentCheck,
    pub assertions: Vec<Assertion>,
}

/// Predicted limits over `draws` independent drift Gaussians against `N(theta*, (sigma_eps^2/N) kappa^{-1})`.
pub fn regression_limit_law(model: &RegressionModel, draws: usize, seed: u64) -> Result<LimitLawReport> {
    if draws < 2 {
        return Err(Error::param("draws", "need at least two draws"));
    }
    let obj = model.objective()?;
    let d = model.sigma.ncols();
    let limits = (0..draws)
        .into_par_iter()
        .map(|r| {
            let v = drift_gaussian(d, PathSeed::new(seed, r as u64));
            let w: Vec<f64> = v.iter().map(|x| x * model.period.sqrt()).collect();
            predicted_limit_from_endpoint(&obj, &model.sigma, model.period, &w).map(|y| y.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = MomentCheck::against(&limits, &model.theta_star, &model.limit_covariance()?);
    let assertions = vec![Assertion::new(
        "limit law moments",
        limit.passes(),
        format!("{draws} draws, max |z| = {:.3} (tolerance {MOMENT_Z} standard errors)", limit.max_z),
    )];
    Ok(LimitLawReport {
        samples: model.samples,
        limit,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OlsReport {
    pub samples: usize,
    pub datasets: usize,
    pub estimates: MomentCheck,
    /// `|S - Sigma|_F / |Sigma|_F` against the limit covariance.
    pub relative_error: f64,
    /// Same against the exact random-design value `sigma_eps^2 kappa^{-1} / (N - d - 1)`.
    pub relative_error_exact: f64,
    pub tolerance: f64,
    pub assertions: Vec<Assertion>,
}

/// OLS over regenerated datasets; empirical covariance against `(sigma_eps^2/N) kappa^{-1}`.
pub fn ols_covariance_check(model: &RegressionModel, law: &InputLaw, datasets: usize, tolerance: f64, seed: u64) -> Result<OlsReport> {
    if datasets < 2 {
        return Err(Error::param("datasets", "need at least two datasets"));
    }
    let theta = model.theta_star.as_slice();
    let estimates = (0..datasets)
        .into_par_iter()
        .map(|r| {
            let data = generate_regression(model.samples, theta, model.sigma_eps, law, PathSeed::new(seed, r as u64))?;
            Ok(ols(&data)?.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let target = model.limit_covariance()?;
    let check = MomentCheck::against(&estimates, &model.theta_star, &target);
    let cov = linalg::matrix_from_rows(&check.covariance)?;
    let relative_error = (&cov - &target).norm() / target.norm();
    let d = theta.len();
    let exact = &target * (model.samples as f64 / (model.samples - d - 1) as f64);
    let relative_error_exact = (&cov - &exact).norm() / exact.norm();
    let assertions = vec![
        Assertion::new(
            "OLS covariance",
            relative_error <= tolerance,
            format!(
                "{datasets} datasets, relative Frobenius error {relative_error:.4} (tolerance {tolerance}); against the exact finite-N value {relative_error_exact:.4}"
            ),
        ),
        Assertion::new(
            "OLS mean",
            check.mean_z.iter().all(|z| z.abs() <= MOMENT_Z),
            format!("mean z-scores {:?} (tolerance {MOMENT_Z} standard errors)", check.mean_z),
        ),
    ];
    Ok(OlsReport {
        samples: model.samples,
        datasets,
        estimates: check,
        relative_error,
        relative_error_exact,
        tolerance,
        assertions,
    })
}

/// One replicate of the coherence comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherenceReplicate {
    pub replicate: usize,
    /// OLS estimate of the replicate's dataset, the discrete limit.
    pub ols: Vec<f64>,
    /// Predicted limit of the continuous run.
    pub limit: Vec<f64>,
    pub times: Vec<f64>,
    /// `max |chi_n - theta_hat|` over the last epoch before each checkpoint.
    pub discrete_errors: Vec<f64>,
    /// `max |Y_s - y_inf|` over the last period before each checkpoint.
    pub continuous_errors: Vec<f64>,
    pub discrete: Option<RateFits>,
    pub continuous: Option<RateFits>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoherenceReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub period: f64,
    pub replicates: Vec<CoherenceReplicate>,
    pub epoch_zero_identical: bool,
    /// Limits of the continuous runs against the limit law.
    pub limit_moments: Option<MomentCheck>,
    /// OLS estimates of the replicate datasets against the limit law.
    pub ols_moments: Option<MomentCheck>,
    /// Epoch-0 endpoints, discrete against continuous.
    pub endpoint_moments: Option<MomentCheck>,
    pub noiseless_gap: f64,
    pub assertions: Vec<Assertion>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Coherence<'a> {
    cfg: &'a ExperimentConfig,
    schedule: Schedule,
    h: f64,
    samples: usize,
    law: &'a InputLaw,
    model: RegressionModel,
    theta0: Vec<f64>,
}

impl Coherence<'_> {
    fn epochs(&self) -> usize {
        (self.cfg.horizon / self.model.period - 1e-9).ceil() as usize
    }

    fn replicate(&self, r: usize) -> Result<CoherenceReplicate> {
        let cfg = self.cfg;
        let seed = PathSeed::new(cfg.seed, r as u64);
        let theta = self.model.theta_star.as_slice();
        let data = generate_regression(self.samples, theta, self.model.sigma_eps, self.law, seed)?;
        let theta_hat = ols(&data)?;
        let stream = PermutationStream::new(cfg.scheme, self.samples, seed)?;
        let (dsteps, times) = checkpoint_steps(self.model.period, cfg.horizon, self.h)?;
        let mut out = CoherenceReplicate {
            replicate: r,
            ols: theta_hat.as_slice().to_vec(),
            limit: Vec::new(),
            times: times.clone(),
            discrete_errors: Vec::new(),
            continuous_errors: Vec::new(),
            discrete: None,
            continuous: None,
            failure: None,
        };
        let mut tracker = ErrorTracker::new(dsteps, self.samples);
        let target = theta_hat.as_slice();
        if let Err(e) = run_sgdo_observed(&data, &stream, self.schedule, self.h, self.epochs(), &self.theta0, |n, chi| {
            tracker.observe(n, distance(chi, target))
        }) {
            out.failure = Some(format!("discrete: {e}"));
            return Ok(out);
        }
        out.discrete_errors = tracker.window_sup;

        let obj = self.model.objective()?;
        let spu = cfg.steps_per_unit;
        let mut driver = EbmEpochs::new(cfg.scheme, self.model.sigma.ncols(), spu, self.model.period, seed.child(1))?;
        let limit = predicted_limit_from_endpoint(&obj, &self.model.sigma, self.model.period, &driver.endpoint())?;
        let dt = self.model.period / spu as f64;
        let csteps: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
        let mut tracker = ErrorTracker::new(csteps, spu);
        let lim = limit.as_slice();
        let solved = solve_additive_streaming(
            gradient_drift(&obj, self.schedule),
            self.schedule,
            &self.model.sigma,
            &mut driver,
            self.epochs(),
            &self.theta0,
            |k, _, y| tracker.observe(k, distance(y, lim)),
        );
        out.limit = lim.to_vec();
        if let Err(e) = solved {
            out.failure = Some(format!("continuous: {e}"));
            return Ok(out);
        }
        out.continuous_errors = tracker.window_sup;
        let p = self.model.period;
        match (
            rate_fits(&times, &out.discrete_errors, p, cfg.horizon, cfg.fit_decades),
            rate_fits(&times, &out.continuous_errors, p, cfg.horizon, cfg.fit_decades),
        ) {
            (Ok(a), Ok(b)) => {
                out.discrete = Some(a);
                out.continuous = Some(b);
            }
            (Err(e), _) | (_, Err(e)) => out.failure = Some(e.to_string()),
        }
        Ok(out)
    }

    /// Epoch-0 endpoints from `theta*`: SGDo on fresh data against the solver on fresh drivers.
    fn endpoints(&self, replicates: usize) -> Result<MomentCheck> {
        let cfg = self.cfg;
        let theta = self.model.theta_star.as_slice();
        let obj = self.model.objective()?;
        let pairs = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let seed = PathSeed::new(cfg.seed, r as u64).child(2);
                let data = generate_regression(self.samples, theta, self.model.sigma_eps, self.law, seed)?;
                let stream = PermutationStream::new(cfg.scheme, self.samples, seed)?;
                let chi = run_sgdo_observed(&data, &stream, self.schedule, self.h, 1, theta, |_, _| {})?;
                let mut driver = EbmEpochs::new(cfg.scheme, self.model.sigma.ncols(), cfg.steps_per_unit, self.model.period, seed)?;
                let y = solve_additive_streaming(
                    gradient_drift(&obj, self.schedule),
                    self.schedule,
                    &self.model.sigma,
                    &mut driver,
                    1,
                    theta,
                    |_, _, _| {},
                )?;
                Ok((chi, y))
            })
            .collect::<Result<Vec<_>>>()?;
        let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Ok(MomentCheck::two_sample(&a, &b))
    }

    fn epoch_zero_identical(&self) -> Result<bool> {
        let seed = PathSeed::new(self.cfg.seed, 0);
        let theta = self.model.theta_star.as_slice();
        let data = generate_regression(self.samples, theta, self.model.sigma_eps, self.law, seed)?;
        let stream = PermutationStream::new(self.cfg.scheme, self.samples, seed)?;
        let one = run_one_pass(&data, self.schedule, self.h, &self.theta0)?;
        let mut same = true;
        run_sgdo_observed(&data, &stream, self.schedule, self.h, 1, &self.theta0, |n, chi| {
            same &= one[n].iter().zip(chi).all(|(a, b)| a.to_bits() == b.to_bits());
        })?;
        Ok(same)
    }

    fn noiseless_gap(&self) -> Result<f64> {
        let theta = self.model.theta_star.as_slice();
        let data = generate_regression(self.samples, theta, 0.0, self.law, PathSeed::new(self.cfg.seed, 0))?;
        let quiet = RegressionModel::new(self.samples, self.h, 0.0, theta, self.law)?;
        let limit = predicted_limit_from_endpoint(&quiet.objective()?, &quiet.sigma, quiet.period, &vec![1.0; theta.len()])?;
        Ok(distance(ols(&data)?.as_slice(), theta).max(distance(limit.as_slice(), theta)))
    }
}

/// SGDo and the solver on the same regression problem with `T = N h`.
pub fn discrete_vs_continuous(cfg: &ExperimentConfig) -> Result<CoherenceReport> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::Coherence {
        return Err(Error::Config("discrete_vs_continuous needs kind = coherence".into()));
    }
    let co = cfg.coherence.as_ref().expect("validated");
    let scheme = co.discrete_scheme.unwrap_or(cfg.scheme);
    if scheme != cfg.scheme {
        return Err(Error::Config(format!("discrete scheme {scheme} differs from driver scheme {}", cfg.scheme)));
    }
    let model = RegressionModel::new(co.samples, co.h, co.sigma_eps, &co.theta_star, &co.input)?;
    let theta0 = cfg.initial.clone().unwrap_or_else(|| vec![0.0; co.theta_star.len()]);
    if theta0.len() != co.theta_star.len() {
        return Err(Error::Config("initial point has the wrong dimension".into()));
    }
    let run = Coherence {
        cfg,
        schedule: cfg.schedule()?,
        h: co.h,
        samples: co.samples,
        law: &co.input,
        model,
        theta0,
    };
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run.replicate(r))
        .collect::<Result<Vec<_>>>()?;
    let epoch_zero_identical = run.epoch_zero_identical()?;
    let noiseless_gap = run.noiseless_gap()?;
    let endpoint_moments = if co.endpoint_replicates >= 2 {
        Some(run.endpoints(co.endpoint_replicates)?)
    } else {
        None
    };
    let ok: Vec<&CoherenceReplicate> = replicates.iter().filter(|r| r.failure.is_none()).collect();
    let (limit_moments, ols_moments) = if ok.len() >= 2 {
        let target = run.model.limit_covariance()?;
        let limits: Vec<Vec<f64>> = ok.iter().map(|r| r.limit.clone()).collect();
        let olss: Vec<Vec<f64>> = ok.iter().map(|r| r.ols.clone()).collect();
        (
            Some(MomentCheck::against(&limits, &run.model.theta_star, &target)),
            Some(MomentCheck::against(&olss, &run.model.theta_star, &target)),
        )
    } else {
        (None, None)
    };

    let total = replicates.len();
    let band = |f: &Option<RateFits>| f.is_some_and(|f| (f.raw.slope + cfg.beta).abs() <= cfg.slope_tolerance);
    let slopes = |pick: fn(&CoherenceReplicate) -> &Option<RateFits>| -> Vec<f64> {
        ok.iter().filter_map(|r| pick(r).map(|f| f.raw.slope)).collect()
    };
    let dslopes = slopes(|r| &r.discrete);
    let cslopes = slopes(|r| &r.continuous);
    let failed: Vec<usize> = replicates.iter().filter(|r| r.failure.is_some()).map(|r| r.replicate).collect();
    let mut assertions = vec![Assertion::new(
        "replicates completed",
        failed.is_empty(),
        format!("{} of {total} completed; failed replicates {failed:?}", ok.len()),
    )];
    let mut a = Assertion::fraction("discrete slope", ok.iter().filter(|r| band(&r.discrete)).count(), total, cfg.pass_fraction);
    a.detail = format!("{}; within {} of -beta = {}, median {:.4}", a.detail, cfg.slope_tolerance, -cfg.beta, median(&dslopes));
    assertions.push(a);
    let mut a = Assertion::fraction("continuous slope", ok.iter().filter(|r| band(&r.continuous)).count(), total, cfg.pass_fraction);
    a.detail = format!("{}; within {} of -beta = {}, median {:.4}", a.detail, cfg.slope_tolerance, -cfg.beta, median(&cslopes));
    assertions.push(a);
    assertions.push(Assertion::new(
        "epoch 0 equals one pass",
        epoch_zero_identical,
        "SGDo epoch 0 against plain SGD on z(0), .., z(N-1), bit for bit",
    ));
    assertions.push(Assertion::new(
        "noiseless limits",
        noiseless_gap <= 1e-10,
        format!("max distance of the discrete and continuous limits to theta* at sigma_eps = 0: {noiseless_gap:.3e}"),
    ));
    for (name, check) in [("continuous limit law", &limit_moments), ("OLS limit law", &ols_moments), ("epoch-0 endpoints", &endpoint_moments)] {
        if let Some(c) = check {
            assertions.push(Assertion::new(
                name,
                c.passes(),
                format!("{} draws, max |z| = {:.3} (tolerance {MOMENT_Z} standard errors)", c.draws, c.max_z),
            ));
        }
    }
    Ok(CoherenceReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        period: run.model.period,
        replicates,
        epoch_zero_identical,
        limit_moments,
        ols_moments,
        endpoint_moments,
        noiseless_gap,
        assertions,
    })
}
