use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::trajectory::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::linalg::spd_eigen;
use crate::noise::Path;
use crate::schedule::Schedule;

/// Inhomogeneity `b_t` of the linear equation.
#[derive(Clone, Debug, PartialEq)]
pub enum Offset {
    Zero,
    /// `b_t = u_t v`; the quadratic `kappa (y - theta*)` drift has `v = kappa theta*`.
    ScheduleScaled(DVector<f64>),
    Constant(DVector<f64>),
}

/// `dY = (-u_t kappa Y + b_t) dt + u_t sigma dX`.
#[derive(Clone, Debug)]
pub struct LinearCoefficients {
    kappa: DMatrix<f64>,
    offset: Offset,
    sigma: DMatrix<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl LinearCoefficients {
    pub fn new(kappa: DMatrix<f64>, offset: Offset, sigma: DMatrix<f64>) -> Result<Self> {
        let eigen = spd_eigen(&kappa)?;
        let d = kappa.nrows();
        if sigma.nrows() != d {
            return Err(Error::GridMismatch(format!("sigma has {} rows, kappa is {d}x{d}", sigma.nrows())));
        }
        match &offset {
            Offset::ScheduleScaled(v) | Offset::Constant(v) if v.len() != d => {
                return Err(Error::GridMismatch(format!("offset has length {}, expected {d}", v.len())));
            }
            _ => {}
        }
        Ok(Self {
            kappa,
            offset,
            sigma,
            eigen,
        })
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn offset(&self) -> &Offset {
        &self.offset
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen.eigenvalues.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigen.eigenvalues.max()
    }

    /// Drift `-u_t kappa y + b_t` for use with the explicit solver.
    pub fn drift(&self, schedule: Schedule) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
        move |t, y, out| {
            let u = schedule.rate_unchecked(t);
            let d = y.len();
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += self.kappa[(i, j)] * y[j];
                }
                out[i] = -u * acc
                    + match &self.offset {
                        Offset::Zero => 0.0,
                        Offset::ScheduleScaled(v) => u * v[i],
                        Offset::Constant(v) => v[i],
                    };
            }
        }
    }

    pub fn propagator(&self, schedule: Schedule) -> Propagator {
        Propagator {
            eigen: self.eigen.clone(),
            schedule,
        }
    }
}

/// `phi_t^s = exp(-kappa U(s, t))` through the spectral decomposition of `kappa`.
#[derive(Clone, Debug)]
pub struct Propagator {
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    schedule: Schedule,
}

impl Propagator {
    pub fn at(&self, s: f64, t: f64) -> Result<DMatrix<f64>> {
        let area = self.schedule.rate_integral(s, t)?;
        let d = DMatrix::from_diagonal(&self.eigen.eigenvalues.map(|l| (-l * area).exp()));
        Ok(&self.eigen.eigenvectors * d * self.eigen.eigenvectors.transpose())
    }

    /// `e^{-lambda_min U(s,t)}`.
    pub fn norm_bound(&self, s: f64, t: f64) -> Result<f64> {
        Ok((-self.eigen.eigenvalues.min() * self.schedule.rate_integral(s, t)?).exp())
    }
}

/// Largest `lambda_max * U(r, t)` before the reference time is moved forward.
const REBASE_EXPONENT: f64 = 50.0;

/// Variation-of-constants solution
/// `Y_t = phi_t^r (Y_r + int_r^t (phi_s^r)^{-1} b_s ds + int_r^t (phi_s^r)^{-1} u_s sigma dX_s)`
/// with left-point Young sums, evaluated in the eigenbasis of `kappa`. The
/// reference time `r` starts at 0 and is advanced whenever the exponentials
/// would exceed `e^50`; the formula is exact under this rebasing.
pub fn linear_solution(
    coeffs: &LinearCoefficients,
    schedule: Schedule,
    driver: &Path,
    y0: &[f64],
) -> Result<Trajectory> {
    let d = coeffs.kappa.nrows();
    let m = coeffs.sigma.ncols();
    if y0.len() != d || driver.dim() != m {
        return Err(Error::GridMismatch(format!(
            "state dimension {} and driver dimension {} do not fit a {d}x{m} sigma",
            y0.len(),
            driver.dim()
        )));
    }
    if driver.len() < 2 {
        return Err(Error::param("driver", "needs at least two grid points"));
    }
    let q = &coeffs.eigen.eigenvectors;
    let lambdas: Vec<f64> = coeffs.eigen.eigenvalues.iter().copied().collect();
    let lmax = coeffs.lambda_max();
    let noise = q.transpose() * &coeffs.sigma;
    let offset = match &coeffs.offset {
        Offset::Zero => None,
        Offset::ScheduleScaled(v) | Offset::Constant(v) => Some(q.transpose() * v),
    };
    let grid = driver.grid();

    let mut base = (q.transpose() * DVector::from_column_slice(y0)).as_slice().to_vec();
    let mut base_time = 0.0;
    let mut acc = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut times = Vec::with_capacity(driver.len());
    let mut states = Vec::with_capacity(driver.len() * d);
    let push = |t: f64, z: &[f64], times: &mut Vec<f64>, states: &mut Vec<f64>| {
        times.push(t);
        let y = q * DVector::from_column_slice(z);
        states.extend_from_slice(y.as_slice());
    };
    push(0.0, &base, &mut times, &mut states);

    for k in 0..driver.len() - 1 {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let area0 = schedule.rate_integral_unchecked(base_time, t0);
        let area1 = schedule.rate_integral_unchecked(base_time, t1);
        let u0 = schedule.rate_unchecked(t0);
        let (a, b) = (driver.at(k), driver.at(k + 1));
        for i in 0..d {
            let l = lambdas[i];
            let inv0 = (l * area0).exp();
            let mut dn = 0.0;
            for c in 0..m {
                dn += noise[(i, c)] * (b[c] - a[c]);
            }
            acc[i] += inv0 * u0 * dn;
            if let Some(v) = &offset {
                acc[i] += match coeffs.offset {
                    // d/dt e^{l U} = l u e^{l U}, so the integral is exact.
                    Offset::ScheduleScaled(_) => v[i] * ((l * area1).exp() - inv0) / l,
                    _ => v[i] * 0.5 * (t1 - t0) * (inv0 + (l * area1).exp()),
                };
            }
        }
        for i in 0..d {
            z[i] = (-lambdas[i] * area1).exp() * (base[i] + acc[i]);
        }
        push(t1, &z, &mut times, &mut states);
        if lmax * area1 > REBASE_EXPONENT {
            base.copy_from_slice(&z);
            acc.iter_mut().for_each(|a| *a = 0.0);
            base_time = t1;
        }
    }
    Trajectory::new(
        times,
        d,
        states,
        TrajectoryMeta {
            schedule: Some(schedule),
            driver: String::new(),
            step: grid.dt(),
            solver: "variation-of-constants".into(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::op_norm;
    use crate::noise::{sample_ebm, Grid, SchemeSpec};
    use crate::rng::{stream_rng, PathSeed};
    use crate::young::solve_additive;
    use rand::Rng;

    #[test]
    fn homogeneous_solution() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        let kappa = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = LinearCoefficients::new(kappa.clone(), Offset::Zero, DMatrix::identity(2, 2)).unwrap();
        let x = Path::zeros(Grid::new(8, 64).unwrap(), 2).unwrap();
        let y0 = [1.0, -2.0];
        let tr = linear_solution(&c, s, &x, &y0).unwrap();
        let p = c.propagator(s);
        for i in (0..tr.len()).step_by(37) {
            let expect = p.at(0.0, tr.times()[i]).unwrap() * DVector::from_column_slice(&y0);
            for k in 0..2 {
                assert!((tr.state(i)[k] - expect[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rebasing_survives_long_horizons() {
        let s = Schedule::new(0.3, 1.0).unwrap();
        let c = LinearCoefficients::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 9.0])),
            Offset::ScheduleScaled(DVector::from_column_slice(&[2.0, 9.0])),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let x = Path::zeros(Grid::new(2000, 4).unwrap(), 2).unwrap();
        let tr = linear_solution(&c, s, &x, &[0.0, 0.0]).unwrap();
        // Equilibrium of -u kappa y + u v is kappa^{-1} v = (2, 1).
        assert!((tr.last()[0] - 2.0).abs() < 1e-12 && (tr.last()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagator_norm_bound() {
        let mut rng = stream_rng(21, 0, 0);
        for _ in 0..20 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
            let kappa = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
            let s = Schedule::new(rng.random_range(0.05..0.95), rng.random_range(0.1..5.0)).unwrap();
            let c = LinearCoefficients::new(kappa, Offset::Zero, DMatrix::identity(3, 3)).unwrap();
            let p = c.propagator(s);
            for _ in 0..20 {
                let s0 = rng.random_range(0.0..100.0);
                let t = s0 + rng.random_range(0.0..100.0);
                assert!(op_norm(&p.at(s0, t).unwrap()) <= p.norm_bound(s0, t).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rejects_non_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(LinearCoefficients::new(bad, Offset::Zero, DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn agrees_with_explicit_solver() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        let kappa = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0]));
        let c = LinearCoefficients::new(
            kappa.clone(),
            Offset::ScheduleScaled(&kappa * DVector::from_column_slice(&[0.5, -0.5])),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let ebm = sample_ebm(SchemeSpec::RandomReshuffle, 2, 10, 1 << 12, 1.0, PathSeed::new(4, 0)).unwrap();
        let exact = linear_solution(&c, s, ebm.path(), &[1.0, 1.0]).unwrap();
        let euler = solve_additive(c.drift(s), s, c.sigma(), ebm.path(), &[1.0, 1.0], "ebm").unwrap();
        let gap = exact.sup_distance(&euler).unwrap();
        assert!(gap < 5e-3, "{gap}");
    }
}
