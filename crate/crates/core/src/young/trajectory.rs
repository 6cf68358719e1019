use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Provenance attached to a [`Trajectory`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub schedule: Option<Schedule>,
    /// Free-form driver identity, e.g. `ebm scheme=rr seed=7`.
    pub driver: String,
    /// Step size used by the solver.
    pub step: f64,
    pub solver: String,
}

/// States on strictly increasing times, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    dim: usize,
    states: Vec<f64>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, dim: usize, states: Vec<f64>, meta: TrajectoryMeta) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if states.len() != times.len() * dim {
            return Err(Error::GridMismatch(format!(
                "{} states for {} times of dimension {dim}",
                states.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if let Some(i) = states.iter().position(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                step: i / dim,
                time: times[i / dim],
                norm: f64::INFINITY,
            });
        }
        Ok(Self {
            times,
            dim,
            states,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    /// Largest Euclidean distance between matching states of two trajectories on the same times.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times != other.times || self.dim != other.dim {
            return Err(Error::GridMismatch("trajectories live on different grids".into()));
        }
        Ok((0..self.len())
            .map(|i| {
                self.state(i)
                    .iter()
                    .zip(other.state(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// Keeps every `factor`-th point (the last point is kept only if it falls on the stride).
    pub fn subsampled(&self, factor: usize) -> Result<Trajectory> {
        if factor == 0 {
            return Err(Error::param("factor", "must be >= 1"));
        }
        let idx: Vec<usize> = (0..self.len()).step_by(factor).collect();
        let times = idx.iter().map(|&i| self.times[i]).collect();
        let states = idx.iter().flat_map(|&i| self.state(i).iter().copied()).collect();
        Trajectory::new(times, self.dim, states, self.meta.clone())
    }

    /// CSV with columns `t, y0..y{d-1}` and, when `limit` is given, `error = |y - limit|`.
    pub fn write_csv<W: Write>(&self, mut out: W, limit: Option<&[f64]>) -> Result<()> {
        if let Some(l) = limit {
            if l.len() != self.dim {
                return Err(Error::param("limit", format!("length {} != dim {}", l.len(), self.dim)));
            }
        }
        write!(out, "t")?;
        for k in 0..self.dim {
            write!(out, ",y{k}")?;
        }
        if limit.is_some() {
            write!(out, ",error")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{}", self.times[i])?;
            for x in self.state(i) {
                write!(out, ",{x}")?;
            }
            if let Some(l) = limit {
                let e = self.state(i).iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                write!(out, ",{e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
