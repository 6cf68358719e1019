//! Discrete reference: SGD without replacement under the four permutation
//! schemes, one-pass SGD, linear-regression data and the OLS estimator.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::SchemeSpec;
use crate::rng::{PathSeed, DATA_LANE, PERMUTATION_LANE};
use crate::schedule::Schedule;
use crate::young::{Trajectory, TrajectoryMeta, DIVERGENCE_LIMIT};

/// `tau(n) = N - 1 - n`, the order-reversing involution of `{0, .., N-1}`.
pub fn reversal(n: usize, len: usize) -> usize {
    len - 1 - n
}

/// Epoch permutations `pi^j` of `{0, .., N-1}` for a scheme, with `pi^0 = id`.
///
/// Flip-flop odd epochs traverse the preceding epoch backwards:
/// `pi^{2j+1}(n) = pi^{2j}(tau(n))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermutationStream {
    scheme: SchemeSpec,
    len: usize,
    seed: PathSeed,
}

impl PermutationStream {
    pub fn new(scheme: SchemeSpec, len: usize, seed: PathSeed) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("N", "must be >= 1"));
        }
        Ok(Self { scheme, len, seed })
    }

    pub fn scheme(&self) -> SchemeSpec {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn uniform(&self, epoch: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..self.len).collect();
        if epoch > 0 {
            p.shuffle(&mut self.seed.lane(PERMUTATION_LANE + epoch as u64));
        }
        p
    }

    fn reversed(&self, p: Vec<usize>) -> Vec<usize> {
        (0..self.len).map(|n| p[reversal(n, self.len)]).collect()
    }

    pub fn permutation(&self, epoch: usize) -> Vec<usize> {
        let identity = || (0..self.len).collect::<Vec<_>>();
        match self.scheme {
            SchemeSpec::SingleShuffle => identity(),
            SchemeSpec::RandomReshuffle => self.uniform(epoch),
            SchemeSpec::FlipFlopSingle if epoch % 2 == 0 => identity(),
            SchemeSpec::FlipFlopSingle => self.reversed(identity()),
            SchemeSpec::FlipFlopRandom if epoch % 2 == 0 => self.uniform(epoch),
            SchemeSpec::FlipFlopRandom => self.reversed(self.uniform(epoch - 1)),
        }
    }
}

/// `R(theta) = 1/N sum_n R_n(theta)` accessed one summand at a time.
pub trait FiniteSum: Sync {
    fn len(&self) -> usize;

    fn dim(&self) -> usize;

    fn sample_gradient_into(&self, index: usize, theta: &[f64], out: &mut [f64]);
}

/// Distribution of the regression inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputLaw {
    StandardGaussian,
    /// Centered Gaussian with the given SPD covariance.
    Gaussian { covariance: Vec<Vec<f64>> },
}

/// `y_n = <x_n, theta*> + eps_n`, `eps_n ~ N(0, sigma_eps^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    theta_star: DVector<f64>,
    sigma_eps: f64,
    seed: PathSeed,
}

impl RegressionDataset {
    pub fn input(&self, n: usize) -> &[f64] {
        &self.inputs[n * self.dim..(n + 1) * self.dim]
    }

    pub fn target(&self, n: usize) -> f64 {
        self.targets[n]
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn seed(&self) -> PathSeed {
        self.seed
    }

    /// `1/N sum_n x_n x_n^T`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.gram() / self.targets.len() as f64
    }

    /// `sum_n x_n x_n^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for n in 0..self.targets.len() {
            let x = self.input(n);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    g[(i, j)] += x[i] * x[j];
                }
            }
        }
        g
    }
}

impl FiniteSum for RegressionDataset {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    /// Gradient of `1/2 (<x_n, theta> - y_n)^2`.
    fn sample_gradient_into(&self, index: usize, theta: &[f64], out: &mut [f64]) {
        let x = self.input(index);
        let r = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - self.targets[index];
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi * r;
        }
    }
}

pub fn generate_regression(
    samples: usize,
    theta_star: &[f64],
    sigma_eps: f64,
    input_law: &InputLaw,
    seed: PathSeed,
) -> Result<RegressionDataset> {
    let dim = theta_star.len();
    if dim == 0 {
        return Err(Error::param("theta_star", "must be non-empty"));
    }
    if samples <= dim {
        return Err(Error::param("N", format!("N = {samples} must exceed d = {dim}")));
    }
    if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
        return Err(Error::param("sigma_eps", format!("{sigma_eps} must be >= 0")));
    }
    let factor = match input_law {
        InputLaw::StandardGaussian => None,
        InputLaw::Gaussian { covariance } => {
            let c = crate::linalg::matrix_from_rows(covariance)?;
            if c.nrows() != dim {
                return Err(Error::param("covariance", "dimension differs from theta_star"));
            }
            crate::linalg::spd_eigen(&c)?;
            Some(c.cholesky().ok_or_else(|| Error::NotPositiveDefinite("input covariance".into()))?.l())
        }
    };
    let mut rng = seed.lane(DATA_LANE);
    let mut inputs = Vec::with_capacity(samples * dim);
    let mut targets = Vec::with_capacity(samples);
    let mut z = vec![0.0; dim];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let start = inputs.len();
        match &factor {
            None => inputs.extend_from_slice(&z),
            Some(l) => inputs.extend((0..dim).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())),
        }
        let x = &inputs[start..];
        let eps: f64 = rng.sample(StandardNormal);
        targets.push(x.iter().zip(theta_star).map(|(a, b)| a * b).sum::<f64>() + sigma_eps * eps);
    }
    Ok(RegressionDataset {
        dim,
        inputs,
        targets,
        theta_star: DVector::from_column_slice(theta_star),
        sigma_eps,
        seed,
    })
}

/// `theta^ = (sum x x^T)^{-1} sum x y` by Cholesky.
pub fn ols(data: &RegressionDataset) -> Result<DVector<f64>> {
    let mut rhs = DVector::zeros(data.dim);
    for n in 0..data.targets.len() {
        for (i, x) in data.input(n).iter().enumerate() {
            rhs[i] += x * data.targets[n];
        }
    }
    let ch = data.gram().cholesky().ok_or_else(|| Error::Singular("Gram matrix".into()))?;
    Ok(ch.solve(&rhs))
}

/// Step `n` is recorded when it is `0`, the last step, or `ceil(ratio^k)` for some `k`.
pub fn geometric_steps(last: usize, ratio: f64) -> Result<Vec<usize>> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::param("ratio", format!("{ratio} must exceed 1")));
    }
    let mut out = vec![0];
    let mut x = 1.0f64;
    while x.ceil() <= last as f64 {
        let n = x.ceil() as usize;
        if *out.last().unwrap() != n {
            out.push(n);
        }
        x *= ratio;
    }
    if *out.last().unwrap() != last {
        out.push(last);
    }
    Ok(out)
}

/// Outcome of a discrete run: iterates `chi_n` at the recorded steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdoRun {
    pub steps: Vec<usize>,
    pub dim: usize,
    pub iterates: Vec<f64>,
    pub step_size: f64,
}

impl SgdoRun {
    pub fn iterate(&self, k: usize) -> &[f64] {
        &self.iterates[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.iterate(self.steps.len() - 1)
    }

    /// Trajectory on continuous time `t = n h`.
    pub fn to_trajectory(&self, schedule: Schedule, label: &str) -> Result<Trajectory> {
        if !(self.step_size > 0.0) {
            return Err(Error::param("h", "continuous time needs h > 0"));
        }
        Trajectory::new(
            self.steps.iter().map(|&n| n as f64 * self.step_size).collect(),
            self.dim,
            self.iterates.clone(),
            TrajectoryMeta {
                schedule: Some(schedule),
                driver: label.to_string(),
                step: self.step_size,
                solver: "sgdo".into(),
            },
        )
    }
}

fn check_run(problem: &dyn FiniteSum, h: f64, theta0: &[f64]) -> Result<()> {
    if theta0.len() != problem.dim() {
        return Err(Error::param("theta0", format!("length {} != dim {}", theta0.len(), problem.dim())));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("{h} must be >= 0")));
    }
    Ok(())
}

fn step(
    problem: &dyn FiniteSum,
    index: usize,
    eta: f64,
    theta: &mut [f64],
    grad: &mut [f64],
    n: usize,
    h: f64,
) -> Result<()> {
    problem.sample_gradient_into(index, theta, grad);
    let mut norm2 = 0.0;
    for (t, g) in theta.iter_mut().zip(grad.iter()) {
        *t -= eta * g;
        norm2 += *t * *t;
    }
    let norm = norm2.sqrt();
    if !(norm <= DIVERGENCE_LIMIT) {
        return Err(Error::Diverged {
            step: n + 1,
            time: (n + 1) as f64 * h,
            norm,
        });
    }
    Ok(())
}

/// `chi_{n+1} = chi_n - h u(nh) grad R_{pi^{floor(n/N)}(n mod N)}(chi_n)` for `epochs` epochs.
/// `observe(n, chi_n)` sees every iterate, including `n = 0`. Returns the final iterate.
pub fn run_sgdo_observed(
    problem: &dyn FiniteSum,
    stream: &PermutationStream,
    schedule: Schedule,
    h: f64,
    epochs: usize,
    theta0: &[f64],
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    check_run(problem, h, theta0)?;
    let big_n = problem.len();
    if stream.len() != big_n {
        return Err(Error::param("stream", format!("order {} != N = {big_n}", stream.len())));
    }
    let mut theta = theta0.to_vec();
    let mut grad = vec![0.0; problem.dim()];
    let mut n = 0;
    observe(0, &theta);
    for j in 0..epochs {
        let pi = stream.permutation(j);
        for &index in &pi {
            let eta = h * schedule.rate_unchecked(n as f64 * h);
            step(problem, index, eta, &mut theta, &mut grad, n, h)?;
            n += 1;
            observe(n, &theta);
        }
    }
    Ok(theta)
}

/// As [`run_sgdo_observed`], recording at [`geometric_steps`] with the given ratio.
pub fn run_sgdo(
    problem: &dyn FiniteSum,
    stream: &PermutationStream,
    schedule: Schedule,
    h: f64,
    epochs: usize,
    theta0: &[f64],
    record_ratio: f64,
) -> Result<SgdoRun> {
    let record = geometric_steps(problem.len() * epochs, record_ratio)?;
    let dim = problem.dim();
    let mut iterates = Vec::with_capacity(record.len() * dim);
    let mut next = 0;
    run_sgdo_observed(problem, stream, schedule, h, epochs, theta0, |n, theta| {
        if next < record.len() && record[next] == n {
            iterates.extend_from_slice(theta);
            next += 1;
        }
    })?;
    Ok(SgdoRun {
        steps: record,
        dim,
        iterates,
        step_size: h,
    })
}

/// One pass of plain SGD over the sample sequence `z(0), .., z(N-1)`; returns every iterate.
pub fn run_one_pass(problem: &dyn FiniteSum, schedule: Schedule, h: f64, theta0: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_run(problem, h, theta0)?;
    let dim = problem.dim();
    let mut theta = theta0.to_vec();
    let mut grad = vec![0.0; dim];
    let mut out = vec![theta.clone()];
    for n in 0..problem.len() {
        let eta = h * schedule.rate_unchecked(n as f64 * h);
        step(problem, n, eta, &mut theta, &mut grad, n, h)?;
        out.push(theta.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(noise: f64, seed: u64) -> RegressionDataset {
        generate_regression(200, &[1.0, -0.5], noise, &InputLaw::StandardGaussian, PathSeed::new(seed, 0)).unwrap()
    }

    #[test]
    fn permutations_follow_schemes() {
        let seed = PathSeed::new(1, 0);
        for scheme in SchemeSpec::ALL {
            let s = PermutationStream::new(scheme, 7, seed).unwrap();
            assert_eq!(s.permutation(0), (0..7).collect::<Vec<_>>());
            for j in 0..6 {
                let mut p = s.permutation(j);
                p.sort_unstable();
                assert_eq!(p, (0..7).collect::<Vec<_>>());
            }
        }
        let ffs = PermutationStream::new(SchemeSpec::FlipFlopSingle, 4, seed).unwrap();
        assert_eq!(ffs.permutation(1), vec![3, 2, 1, 0]);
        assert_eq!(ffs.permutation(2), vec![0, 1, 2, 3]);
        let ffr = PermutationStream::new(SchemeSpec::FlipFlopRandom, 9, seed).unwrap();
        let even = ffr.permutation(4);
        let mut back = ffr.permutation(5);
        back.reverse();
        assert_eq!(even, back);
        let rr = PermutationStream::new(SchemeSpec::RandomReshuffle, 9, seed).unwrap();
        assert_ne!(rr.permutation(1), rr.permutation(2));
        assert_eq!(rr.permutation(3), rr.permutation(3));
    }

    #[test]
    fn random_reshuffle_is_uniform() {
        let n = 6;
        let draws = 100_000u64;
        let mut counts = vec![[0u64; 6]; n];
        for k in 0..draws {
            let s = PermutationStream::new(SchemeSpec::RandomReshuffle, n, PathSeed::new(77, k)).unwrap();
            for (pos, v) in s.permutation(1).into_iter().enumerate() {
                counts[pos][v] += 1;
            }
        }
        let expect = draws as f64 / n as f64;
        // 99% quantile of chi^2 with 5 degrees of freedom.
        const CHI2_5_99: f64 = 15.086272469388990;
        for row in counts {
            let chi2: f64 = row.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
            assert!(chi2 < CHI2_5_99, "{chi2}");
        }
    }

    #[test]
    fn dataset_generation() {
        let a = data(0.3, 5);
        assert_eq!(a, data(0.3, 5));
        assert!(generate_regression(2, &[1.0, 2.0], 0.1, &InputLaw::StandardGaussian, PathSeed::new(0, 0)).is_err());
        let clean = data(0.0, 6);
        for n in 0..clean.len() {
            let x = clean.input(n);
            assert_eq!(clean.target(n), x[0] * 1.0 + x[1] * -0.5);
        }
        assert!((ols(&clean).unwrap() - clean.theta_star()).amax() < 1e-10);
    }

    #[test]
    fn correlated_inputs() {
        let law = InputLaw::Gaussian {
            covariance: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
        };
        let d = generate_regression(200_000, &[0.0, 0.0], 0.0, &law, PathSeed::new(3, 0)).unwrap();
        let m = d.second_moment();
        assert!((m[(0, 0)] - 2.0).abs() < 0.03 && (m[(0, 1)] - 0.5).abs() < 0.02 && (m[(1, 1)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn minimal_ols() {
        let d = RegressionDataset {
            dim: 1,
            inputs: vec![1.0, 2.0],
            targets: vec![1.0, 2.0],
            theta_star: DVector::from_element(1, 1.0),
            sigma_eps: 0.0,
            seed: PathSeed::new(0, 0),
        };
        assert!((ols(&d).unwrap()[0] - 1.0).abs() < 1e-15);
        let singular = RegressionDataset {
            dim: 2,
            inputs: vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0],
            targets: vec![1.0, 2.0, 3.0],
            ..d
        };
        assert!(matches!(ols(&singular), Err(Error::Singular(_))));
    }

    #[test]
    fn first_epoch_is_one_pass() {
        let d = data(0.5, 9);
        let s = Schedule::new(0.7, 1.0).unwrap();
        for scheme in SchemeSpec::ALL {
            let stream = PermutationStream::new(scheme, d.len(), PathSeed::new(2, 0)).unwrap();
            let run = run_sgdo(&d, &stream, s, 0.05, 1, &[0.0, 0.0], 1.5).unwrap();
            let one = run_one_pass(&d, s, 0.05, &[0.0, 0.0]).unwrap();
            for (k, &n) in run.steps.iter().enumerate() {
                assert_eq!(run.iterate(k), one[n].as_slice());
            }
        }
    }

    #[test]
    fn zero_rate_is_constant() {
        let d = data(0.5, 9);
        let s = Schedule::new(0.7, 1.0).unwrap();
        let stream = PermutationStream::new(SchemeSpec::RandomReshuffle, d.len(), PathSeed::new(2, 0)).unwrap();
        let run = run_sgdo(&d, &stream, s, 0.0, 3, &[0.3, 0.1], 2.0).unwrap();
        assert!(run.iterates.chunks(2).all(|c| c == [0.3, 0.1]));
    }

    #[test]
    fn converges_to_ols_not_truth() {
        let d = generate_regression(50, &[1.0, -0.5], 1.0, &InputLaw::StandardGaussian, PathSeed::new(31, 0)).unwrap();
        let theta_hat = ols(&d).unwrap();
        let s = Schedule::new(0.7, 1.0).unwrap();
        let stream = PermutationStream::new(SchemeSpec::RandomReshuffle, d.len(), PathSeed::new(4, 0)).unwrap();
        let run = run_sgdo(&d, &stream, s, 0.02, 4000, &[0.0, 0.0], 2.0).unwrap();
        let last = DVector::from_column_slice(run.last());
        let to_hat = (&last - &theta_hat).norm();
        let to_star = (&last - d.theta_star()).norm();
        assert!((&theta_hat - d.theta_star()).norm() > 5.0 * to_hat, "{to_hat}");
        assert!(to_hat < to_star);
    }

    #[test]
    fn geometric_recording() {
        assert_eq!(geometric_steps(10, 2.0).unwrap(), vec![0, 1, 2, 4, 8, 10]);
        assert_eq!(geometric_steps(0, 2.0).unwrap(), vec![0]);
        assert!(geometric_steps(10, 1.0).is_err());
    }
}
