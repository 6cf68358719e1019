use nalgebra::{DMatrix, DVector};

use super::trajectory::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::noise::EbmPath;
use crate::objectives::{predicted_limit, Objective};
use crate::schedule::Schedule;

/// Change of variables `Y~_s = T^{-1/2} sigma^{-1} (Y_{sT} - y_inf)` with
/// `y_inf = (grad R)^{-1}(g_inf)` and `g_inf = T^{-1} sigma W_T`.
///
/// If `dY = -u_t grad R(Y) dt + u_t sigma dW` then
/// `dY~ = -u~_s G(Y~) ds + u~_s dX` with `u~_s = u_{sT}` (rate `c T`) and
/// `G(z) = T^{1/2} sigma^{-1} (grad R(T^{1/2} sigma z + y_inf) - g_inf)`.
/// The explicit scheme commutes with the map, step for step.
#[derive(Clone, Debug)]
pub struct ReducedCoordinates {
    period: f64,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    limit: DVector<f64>,
    target_gradient: DVector<f64>,
}

impl ReducedCoordinates {
    pub fn new(objective: &dyn Objective, sigma: &DMatrix<f64>, ebm: &EbmPath) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::Singular(format!(
                "sigma is {}x{}; the reduction needs a square invertible matrix",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Singular("sigma is not invertible".into()))?;
        let limit = predicted_limit(objective, sigma, ebm)?;
        let period = ebm.period();
        let target_gradient = sigma * DVector::from_column_slice(&ebm.endpoint()) / period;
        Ok(Self {
            period,
            sigma: sigma.clone(),
            sigma_inv,
            limit,
            target_gradient,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `y_inf`.
    pub fn limit(&self) -> &DVector<f64> {
        &self.limit
    }

    /// Schedule in reduced time: `u~_s = u_{sT}`.
    pub fn schedule(&self, schedule: Schedule) -> Result<Schedule> {
        schedule.rescaled(self.period)
    }

    pub fn forward_state(&self, y: &[f64]) -> DVector<f64> {
        &self.sigma_inv * (DVector::from_column_slice(y) - &self.limit) / self.period.sqrt()
    }

    pub fn inverse_state(&self, z: &[f64]) -> DVector<f64> {
        &self.sigma * DVector::from_column_slice(z) * self.period.sqrt() + &self.limit
    }

    /// `Y -> Y~`, with times divided by `T`.
    pub fn forward(&self, y: &Trajectory) -> Result<Trajectory> {
        self.map(y, 1.0 / self.period, |p| self.forward_state(p), "reduced")
    }

    /// `Y~ -> Y`, with times multiplied by `T`.
    pub fn inverse(&self, z: &Trajectory) -> Result<Trajectory> {
        self.map(z, self.period, |p| self.inverse_state(p), "original")
    }

    fn map(
        &self,
        tr: &Trajectory,
        time_factor: f64,
        f: impl Fn(&[f64]) -> DVector<f64>,
        tag: &str,
    ) -> Result<Trajectory> {
        if tr.dim() != self.limit.len() {
            return Err(Error::GridMismatch(format!(
                "trajectory dimension {} != {}",
                tr.dim(),
                self.limit.len()
            )));
        }
        let times = tr.times().iter().map(|t| t * time_factor).collect();
        let states = (0..tr.len()).flat_map(|i| f(tr.state(i)).as_slice().to_vec()).collect();
        let meta = TrajectoryMeta {
            driver: format!("{} ({tag} coordinates)", tr.meta().driver),
            step: tr.meta().step * time_factor,
            ..tr.meta().clone()
        };
        Trajectory::new(times, tr.dim(), states, meta)
    }

    /// Drift `-u~_s G(z)` of the reduced equation.
    pub fn drift<'a>(
        &'a self,
        objective: &'a dyn Objective,
        schedule: Schedule,
    ) -> Result<impl FnMut(f64, &[f64], &mut [f64]) + 'a> {
        let reduced = self.schedule(schedule)?;
        let root = self.period.sqrt();
        let d = self.limit.len();
        let mut y = vec![0.0; d];
        let mut g = vec![0.0; d];
        Ok(move |s: f64, z: &[f64], out: &mut [f64]| {
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += self.sigma[(i, j)] * z[j];
                }
                y[i] = root * acc + self.limit[i];
            }
            objective.gradient_into(&y, &mut g);
            let u = reduced.rate_unchecked(s);
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += self.sigma_inv[(i, j)] * (g[j] - self.target_gradient[j]);
                }
                out[i] = -u * root * acc;
            }
        })
    }
}

/// Maps a solution of the gradient equation driven by `ebm` into reduced coordinates.
pub fn reduce_trajectory(
    y: &Trajectory,
    sigma: &DMatrix<f64>,
    objective: &dyn Objective,
    ebm: &EbmPath,
) -> Result<Trajectory> {
    ReducedCoordinates::new(objective, sigma, ebm)?.forward(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{assemble_ebm_with, sample_ebm, sample_epoched_bridge, SchemeSpec};
    use crate::objectives::{make_perturbed_quadratic, QuadraticObjective};
    use crate::rng::PathSeed;
    use crate::young::{gradient_drift, solve_additive};

    #[test]
    fn identity_when_trivial() {
        let q = QuadraticObjective::new(DMatrix::identity(1, 1) * 2.0, DVector::zeros(1)).unwrap();
        let bridge = sample_epoched_bridge(SchemeSpec::RandomReshuffle, 1, 3, 64, PathSeed::new(2, 0)).unwrap();
        let ebm = assemble_ebm_with(bridge, 1.0, vec![0.0]).unwrap();
        let s = Schedule::new(0.5, 1.0).unwrap();
        let sigma = DMatrix::identity(1, 1);
        let y = solve_additive(gradient_drift(&q, s), s, &sigma, ebm.path(), &[0.7], "ebm").unwrap();
        let z = reduce_trajectory(&y, &sigma, &q, &ebm).unwrap();
        assert_eq!(z.times(), y.times());
        assert_eq!(z.states(), y.states());
    }

    #[test]
    fn round_trip() {
        let p = make_perturbed_quadratic(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), 0.05, 2.0).unwrap();
        let ebm = sample_ebm(SchemeSpec::FlipFlopRandom, 2, 4, 128, 4.0, PathSeed::new(5, 1)).unwrap();
        let s = Schedule::new(0.6, 1.5).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, -0.2, 0.5]);
        let y = solve_additive(gradient_drift(&p, s), s, &sigma, ebm.path(), &[1.0, -1.0], "ebm").unwrap();
        let map = ReducedCoordinates::new(&p, &sigma, &ebm).unwrap();
        let back = map.inverse(&map.forward(&y).unwrap()).unwrap();
        assert!(back.sup_distance(&y).unwrap() < 1e-12);
    }

    #[test]
    fn singular_sigma_rejected() {
        let q = QuadraticObjective::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let ebm = sample_ebm(SchemeSpec::SingleShuffle, 2, 1, 8, 1.0, PathSeed::new(1, 0)).unwrap();
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(ReducedCoordinates::new(&q, &singular, &ebm), Err(Error::Singular(_))));
    }

    #[test]
    fn both_routes_agree() {
        let p = make_perturbed_quadratic(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), 0.05, 2.0).unwrap();
        let period = 2.0;
        let ebm = sample_ebm(SchemeSpec::RandomReshuffle, 2, 5, 1 << 12, period, PathSeed::new(9, 0)).unwrap();
        let s = Schedule::new(0.5, 1.0).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.4]);
        let y = solve_additive(gradient_drift(&p, s), s, &sigma, ebm.path(), &[1.0, -1.0], "ebm").unwrap();
        let map = ReducedCoordinates::new(&p, &sigma, &ebm).unwrap();
        let via_transform = map.forward(&y).unwrap();
        let z0 = map.forward_state(&[1.0, -1.0]);
        let direct = solve_additive(
            map.drift(&p, s).unwrap(),
            map.schedule(s).unwrap(),
            &DMatrix::identity(2, 2),
            ebm.bridge().path(),
            z0.as_slice(),
            "bridge",
        )
        .unwrap();
        assert_eq!(direct.len(), via_transform.len());
        let gap = (0..direct.len())
            .map(|i| {
                direct
                    .state(i)
                    .iter()
                    .zip(via_transform.state(i))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        assert!(gap < 1e-9, "{gap}");
    }
}
