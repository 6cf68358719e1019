use nalgebra::DMatrix;

use super::trajectory::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::noise::{EbmEpochs, Path};
use crate::schedule::Schedule;

/// States with Euclidean norm above this are reported as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// `f_t(y) = -u_t grad R(y)`.
pub fn gradient_drift<'a>(
    objective: &'a dyn Objective,
    schedule: Schedule,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    move |t, y, out| {
        objective.gradient_into(y, out);
        let u = schedule.rate_unchecked(t);
        for o in out.iter_mut() {
            *o *= -u;
        }
    }
}

fn check_inputs(sigma: &DMatrix<f64>, driver_dim: usize, y0: &[f64]) -> Result<()> {
    if sigma.nrows() != y0.len() || sigma.ncols() != driver_dim {
        return Err(Error::GridMismatch(format!(
            "sigma is {}x{}, state has dimension {} and driver {}",
            sigma.nrows(),
            sigma.ncols(),
            y0.len(),
            driver_dim
        )));
    }
    Ok(())
}

/// One explicit step shared by the path and streaming drivers.
struct Stepper {
    d: usize,
    m: usize,
    sig: Vec<f64>,
    y: Vec<f64>,
    f: Vec<f64>,
    schedule: Schedule,
}

impl Stepper {
    fn new(sigma: &DMatrix<f64>, y0: &[f64], schedule: Schedule) -> Self {
        let (d, m) = (sigma.nrows(), sigma.ncols());
        Self {
            d,
            m,
            sig: (0..d).flat_map(|r| (0..m).map(move |c| (r, c))).map(|(r, c)| sigma[(r, c)]).collect(),
            y: y0.to_vec(),
            f: vec![0.0; d],
            schedule,
        }
    }

    #[inline]
    fn step<F: FnMut(f64, &[f64], &mut [f64])>(
        &mut self,
        drift: &mut F,
        k: usize,
        t: f64,
        t_next: f64,
        a: &[f64],
        b: &[f64],
    ) -> Result<()> {
        drift(t, &self.y, &mut self.f);
        let u = self.schedule.rate_unchecked(t);
        let dt = t_next - t;
        let mut norm2 = 0.0;
        for r in 0..self.d {
            let mut noise = 0.0;
            for c in 0..self.m {
                noise += self.sig[r * self.m + c] * (b[c] - a[c]);
            }
            self.y[r] += self.f[r] * dt + u * noise;
            norm2 += self.y[r] * self.y[r];
        }
        let norm = norm2.sqrt();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(Error::Diverged {
                step: k + 1,
                time: t_next,
                norm,
            });
        }
        Ok(())
    }
}

/// Euler–Young scheme `Y_{k+1} = Y_k + f_{t_k}(Y_k) dt + u_{t_k} sigma (X_{k+1} - X_k)`
/// on the driver's grid. `observe(k, t_k, Y_k)` sees every point, including `k = 0`.
/// Returns the final state.
pub fn solve_additive_observed<F, O>(
    mut drift: F,
    schedule: Schedule,
    sigma: &DMatrix<f64>,
    driver: &Path,
    y0: &[f64],
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    check_inputs(sigma, driver.dim(), y0)?;
    if driver.len() < 2 {
        return Err(Error::param("driver", "needs at least two grid points"));
    }
    let grid = driver.grid();
    let mut st = Stepper::new(sigma, y0, schedule);
    observe(0, 0.0, &st.y);
    for k in 0..driver.len() - 1 {
        let t_next = grid.time(k + 1);
        st.step(&mut drift, k, grid.time(k), t_next, driver.at(k), driver.at(k + 1))?;
        observe(k + 1, t_next, &st.y);
    }
    Ok(st.y)
}

/// As [`solve_additive_observed`] for `epochs` epochs of a streamed epoched
/// Brownian motion; identical arithmetic to solving on the materialised path.
pub fn solve_additive_streaming<F, O>(
    mut drift: F,
    schedule: Schedule,
    sigma: &DMatrix<f64>,
    driver: &mut EbmEpochs,
    epochs: usize,
    y0: &[f64],
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    check_inputs(sigma, driver.dim(), y0)?;
    if driver.position() != 0 {
        return Err(Error::param("driver", "stream must start at epoch 0"));
    }
    let n = driver.steps_per_unit();
    let m = driver.dim();
    let mut st = Stepper::new(sigma, y0, schedule);
    observe(0, 0.0, &st.y);
    for j in 0..epochs {
        let w = driver.next_epoch()?.to_vec();
        for i in 0..n {
            let k = j * n + i;
            let (t, t_next) = (driver.time(j, i), driver.time(j, i + 1));
            st.step(&mut drift, k, t, t_next, &w[i * m..(i + 1) * m], &w[(i + 1) * m..(i + 2) * m])?;
            observe(k + 1, t_next, &st.y);
        }
    }
    Ok(st.y)
}

/// As [`solve_additive_observed`], keeping every state.
pub fn solve_additive<F>(
    drift: F,
    schedule: Schedule,
    sigma: &DMatrix<f64>,
    driver: &Path,
    y0: &[f64],
    driver_label: &str,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut times = Vec::with_capacity(driver.len());
    let mut states = Vec::with_capacity(driver.len() * y0.len());
    solve_additive_observed(drift, schedule, sigma, driver, y0, |_, t, y| {
        times.push(t);
        states.extend_from_slice(y);
    })?;
    Trajectory::new(
        times,
        y0.len(),
        states,
        TrajectoryMeta {
            schedule: Some(schedule),
            driver: driver_label.to_string(),
            step: driver.grid().dt(),
            solver: "euler-young".into(),
        },
    )
}
