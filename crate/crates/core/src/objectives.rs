//! Strongly convex test objectives with certified constants.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, spd_eigen};
use crate::noise::EbmPath;

/// Hölder modulus of the Hessian: `||H(x) - H(y)|| <= constant |x - y|^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianHolder {
    pub exponent: f64,
    pub constant: f64,
}

/// Certified curvature constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Strong-convexity modulus.
    pub lambda: f64,
    /// Lipschitz constant of the gradient.
    pub smoothness: f64,
    pub hessian_holder: HessianHolder,
}

impl Constants {
    pub fn condition(&self) -> f64 {
        self.smoothness / self.lambda
    }
}

/// A `C^2`, strongly convex, smooth risk on `R^d`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, y: &[f64]) -> f64;

    fn gradient_into(&self, y: &[f64], out: &mut [f64]);

    fn hessian(&self, y: &[f64]) -> DMatrix<f64>;

    fn constants(&self) -> Constants;

    /// `(kappa, center)` when the objective is `1/2 (y-center)^T kappa (y-center)` plus a bounded-curvature perturbation.
    fn quadratic_part(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.gradient_into(y, out.as_mut_slice());
        out
    }

    /// `r(y) = grad R(y) - hess R(0) y`.
    fn remainder(&self, y: &[f64]) -> DVector<f64> {
        let h0 = self.hessian(&vec![0.0; self.dim()]);
        self.gradient(y) - h0 * linalg::to_vector(y)
    }
}

/// `R(y) = 1/2 (y - theta*)^T kappa (y - theta*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    kappa: DMatrix<f64>,
    theta_star: DVector<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticObjective {
    pub fn new(kappa: DMatrix<f64>, theta_star: DVector<f64>) -> Result<Self> {
        let eig = spd_eigen(&kappa)?;
        if theta_star.len() != kappa.nrows() {
            return Err(Error::param("theta_star", "length differs from kappa"));
        }
        Ok(Self {
            lambda_min: eig.eigenvalues.min(),
            lambda_max: eig.eigenvalues.max(),
            kappa,
            theta_star,
        })
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        let e = linalg::to_vector(y) - &self.theta_star;
        0.5 * e.dot(&(&self.kappa * &e))
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.kappa[(i, j)] * (y[j] - self.theta_star[j]);
            }
            out[i] = acc;
        }
    }

    fn hessian(&self, _y: &[f64]) -> DMatrix<f64> {
        self.kappa.clone()
    }

    fn constants(&self) -> Constants {
        Constants {
            lambda: self.lambda_min,
            smoothness: self.lambda_max,
            hessian_holder: HessianHolder {
                exponent: 1.0,
                constant: 0.0,
            },
        }
    }

    fn quadratic_part(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.kappa.clone(), self.theta_star.clone()))
    }
}

/// `R(y) = 1/2 y^T kappa y + eps * sum_i cos(freq * y_i)`.
///
/// Curvature of the cosine term lies in `[-eps freq^2, eps freq^2]`, so the
/// certified constants are `lambda_min(kappa) - eps freq^2` and
/// `lambda_max(kappa) + eps freq^2`; the Hessian is Lipschitz with `eps freq^3`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedQuadratic {
    kappa: DMatrix<f64>,
    eps: f64,
    freq: f64,
    constants: Constants,
}

impl PerturbedQuadratic {
    pub fn new(kappa: DMatrix<f64>, eps: f64, freq: f64) -> Result<Self> {
        let eig = spd_eigen(&kappa)?;
        if !(eps >= 0.0 && freq.is_finite()) {
            return Err(Error::param("eps", format!("eps = {eps} must be >= 0")));
        }
        let curvature = eps * freq * freq;
        let lambda = eig.eigenvalues.min() - curvature;
        if !(lambda > 0.0) {
            return Err(Error::Certification(format!(
                "lambda_min(kappa) - eps freq^2 = {lambda} is not positive"
            )));
        }
        Ok(Self {
            constants: Constants {
                lambda,
                smoothness: eig.eigenvalues.max() + curvature,
                hessian_holder: HessianHolder {
                    exponent: 1.0,
                    constant: eps * freq.abs().powi(3),
                },
            },
            kappa,
            eps,
            freq,
        })
    }
}

/// Builds the perturbed quadratic, rejecting perturbations that break strong convexity.
pub fn make_perturbed_quadratic(kappa: DMatrix<f64>, eps: f64, freq: f64) -> Result<PerturbedQuadratic> {
    PerturbedQuadratic::new(kappa, eps, freq)
}

impl Objective for PerturbedQuadratic {
    fn dim(&self) -> usize {
        self.kappa.nrows()
    }

    fn value(&self, y: &[f64]) -> f64 {
        let v = linalg::to_vector(y);
        0.5 * v.dot(&(&self.kappa * &v)) + self.eps * y.iter().map(|x| (self.freq * x).cos()).sum::<f64>()
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.kappa[(i, j)] * y[j];
            }
            out[i] = acc - self.eps * self.freq * (self.freq * y[i]).sin();
        }
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let mut h = self.kappa.clone();
        let c = self.eps * self.freq * self.freq;
        for i in 0..self.dim() {
            h[(i, i)] -= c * (self.freq * y[i]).cos();
        }
        h
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn quadratic_part(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.kappa.clone(), DVector::zeros(self.dim())))
    }
}

/// Serializable description of an objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Quadratic {
        kappa: Vec<Vec<f64>>,
        #[serde(default)]
        theta_star: Option<Vec<f64>>,
    },
    PerturbedQuadratic {
        kappa: Vec<Vec<f64>>,
        eps: f64,
        freq: f64,
    },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Box<dyn Objective>> {
        match self {
            ObjectiveSpec::Quadratic { kappa, theta_star } => {
                let k = linalg::matrix_from_rows(kappa)?;
                let theta = theta_star
                    .as_ref()
                    .map(|t| DVector::from_column_slice(t))
                    .unwrap_or_else(|| DVector::zeros(k.nrows()));
                Ok(Box::new(QuadraticObjective::new(k, theta)?))
            }
            ObjectiveSpec::PerturbedQuadratic { kappa, eps, freq } => {
                Ok(Box::new(PerturbedQuadratic::new(linalg::matrix_from_rows(kappa)?, *eps, *freq)?))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::Quadratic { kappa, .. } | ObjectiveSpec::PerturbedQuadratic { kappa, .. } => kappa.len(),
        }
    }
}

/// Outcome of [`grad_inverse`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradInverse {
    pub point: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub const DEFAULT_INVERSE_TOL: f64 = 1e-10;
const MAX_INVERSE_ITERATIONS: usize = 100;

/// Solves `grad R(y) = v` by damped Newton, falling back to gradient descent
/// on `1/2 |grad R(y) - v|^2` when a Newton step fails to reduce the residual.
pub fn grad_inverse(obj: &dyn Objective, v: &[f64], tol: f64) -> Result<GradInverse> {
    let d = obj.dim();
    if v.len() != d {
        return Err(Error::param("v", format!("length {} != dim {d}", v.len())));
    }
    let target = linalg::to_vector(v);
    let mut y = match obj.quadratic_part() {
        Some((kappa, center)) => match kappa.clone().cholesky() {
            Some(ch) => ch.solve(&target) + center,
            None => DVector::zeros(d),
        },
        None => DVector::zeros(d),
    };
    let residual_at = |y: &DVector<f64>| obj.gradient(y.as_slice()) - &target;
    let mut r = residual_at(&y);
    let smooth = obj.constants().smoothness;
    for it in 0..MAX_INVERSE_ITERATIONS {
        let rn = r.norm();
        if rn <= tol {
            return Ok(GradInverse {
                point: y,
                residual: rn,
                iterations: it,
            });
        }
        let h = obj.hessian(y.as_slice());
        let mut accepted = false;
        if let Some(ch) = h.clone().cholesky() {
            let step = ch.solve(&r);
            let mut damping = 1.0;
            for _ in 0..40 {
                let cand = &y - &step * damping;
                let rc = residual_at(&cand);
                if rc.norm() < rn {
                    y = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
        }
        if !accepted {
            let dir = h.transpose() * &r;
            let cand = &y - dir / (smooth * smooth);
            let rc = residual_at(&cand);
            y = cand;
            r = rc;
        }
    }
    let residual = r.norm();
    if residual <= tol {
        Ok(GradInverse {
            point: y,
            residual,
            iterations: MAX_INVERSE_ITERATIONS,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_INVERSE_ITERATIONS,
            residual,
        })
    }
}

/// `(grad R)^{-1}(T^{-1} sigma W_T)`: the random point the dynamics settle at.
pub fn predicted_limit(obj: &dyn Objective, sigma: &DMatrix<f64>, ebm: &EbmPath) -> Result<DVector<f64>> {
    predicted_limit_from_endpoint(obj, sigma, ebm.period(), &ebm.endpoint())
}

/// As [`predicted_limit`] from the endpoint `W_T` alone.
pub fn predicted_limit_from_endpoint(
    obj: &dyn Objective,
    sigma: &DMatrix<f64>,
    period: f64,
    endpoint: &[f64],
) -> Result<DVector<f64>> {
    if sigma.nrows() != obj.dim() || sigma.ncols() != endpoint.len() {
        return Err(Error::param(
            "sigma",
            format!(
                "{}x{} does not map R^{} to R^{}",
                sigma.nrows(),
                sigma.ncols(),
                endpoint.len(),
                obj.dim()
            ),
        ));
    }
    let g = sigma * linalg::to_vector(endpoint) / period;
    Ok(grad_inverse(obj, g.as_slice(), DEFAULT_INVERSE_TOL)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn kappa() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])
    }

    fn random_point(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
    }

    #[test]
    fn quadratic_inverse_is_linear_solve() {
        let q = QuadraticObjective::new(kappa(), DVector::zeros(2)).unwrap();
        let v = [0.3, -1.2];
        let y = grad_inverse(&q, &v, 1e-12).unwrap().point;
        let expect = kappa().try_inverse().unwrap() * DVector::from_column_slice(&v);
        assert!((y - expect).amax() < 1e-12);
    }

    #[test]
    fn inverse_recovers_points() {
        let p = make_perturbed_quadratic(kappa(), 0.05, 2.0).unwrap();
        let lambda = p.constants().lambda;
        let mut rng = stream_rng(3, 0, 0);
        for _ in 0..50 {
            let y0 = random_point(&mut rng, 2, 5.0);
            let v = p.gradient(&y0);
            let sol = grad_inverse(&p, v.as_slice(), 1e-10).unwrap();
            assert!((sol.point - DVector::from_column_slice(&y0)).norm() <= 1e-10 / lambda * 1.0001);
        }
        for _ in 0..50 {
            let v = random_point(&mut rng, 2, 10.0);
            let sol = grad_inverse(&p, &v, 1e-10).unwrap();
            assert!(sol.residual <= 1e-10);
            assert!(sol.iterations <= 50);
        }
    }

    #[test]
    fn perturbed_quadratic_basics() {
        let p = make_perturbed_quadratic(kappa(), 0.0, 3.0).unwrap();
        let q = QuadraticObjective::new(kappa(), DVector::zeros(2)).unwrap();
        let y = [0.4, -0.7];
        assert_eq!(p.gradient(&y), q.gradient(&y));
        let p = make_perturbed_quadratic(kappa(), 0.05, 2.0).unwrap();
        let h0 = p.hessian(&[0.0, 0.0]);
        assert!((h0[(0, 0)] - (2.0 - 0.2)).abs() < 1e-15);
        assert!((h0[(1, 1)] - (1.0 - 0.2)).abs() < 1e-15);
        assert_eq!(h0[(0, 1)], 0.5);
        assert!(make_perturbed_quadratic(kappa(), 0.5, 2.0).is_err());
    }

    #[test]
    fn certified_constants_hold_on_samples() {
        let p = make_perturbed_quadratic(kappa(), 0.05, 2.0).unwrap();
        let c = p.constants();
        assert!(c.lambda <= c.smoothness);
        let mut rng = stream_rng(5, 0, 0);
        for _ in 0..1000 {
            let x = random_point(&mut rng, 2, 4.0);
            let y = random_point(&mut rng, 2, 4.0);
            let dg = p.gradient(&x) - p.gradient(&y);
            let dx = DVector::from_column_slice(&x) - DVector::from_column_slice(&y);
            assert!(dg.dot(&dx) >= c.lambda * dx.norm_squared() * (1.0 - 1e-12));
            assert!(dg.norm() <= c.smoothness * dx.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let objs: Vec<Box<dyn Objective>> = vec![
            Box::new(QuadraticObjective::new(kappa(), DVector::from_column_slice(&[1.0, -2.0])).unwrap()),
            Box::new(make_perturbed_quadratic(kappa(), 0.05, 2.0).unwrap()),
        ];
        let mut rng = stream_rng(6, 0, 0);
        for obj in &objs {
            for _ in 0..100 {
                let y = random_point(&mut rng, 2, 3.0);
                let h = obj.hessian(&y);
                let step = 1e-5;
                for j in 0..2 {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[j] += step;
                    ym[j] -= step;
                    let col = (obj.gradient(&yp) - obj.gradient(&ym)) / (2.0 * step);
                    for i in 0..2 {
                        let scale = h[(i, j)].abs().max(1.0);
                        assert!((col[i] - h[(i, j)]).abs() / scale < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn remainder_is_superlinear() {
        let p = make_perturbed_quadratic(kappa(), 0.05, 2.0).unwrap();
        let hh = p.constants().hessian_holder;
        let mut rng = stream_rng(8, 0, 0);
        for _ in 0..200 {
            let y = random_point(&mut rng, 2, 2.0);
            let r = p.remainder(&y).norm();
            let n = linalg::norm(&y);
            // Hadamard: |r(y)| <= C/(1+gamma) |y|^(1+gamma).
            assert!(r <= hh.constant / (1.0 + hh.exponent) * n.powf(1.0 + hh.exponent) + 1e-14);
        }
    }

    #[test]
    fn spec_round_trip() {
        let spec = ObjectiveSpec::PerturbedQuadratic {
            kappa: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
            eps: 0.02,
            freq: 1.5,
        };
        let text = toml::to_string(&spec).unwrap();
        let back: ObjectiveSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().dim(), 2);
    }
}
