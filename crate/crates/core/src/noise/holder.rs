//! Grid approximations of Hölder seminorms.

use super::grid::Path;
use crate::error::{Error, Result};

/// Which grid pairs enter the supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PairSet {
    /// All pairs: the exact supremum over the grid.
    #[default]
    Exhaustive,
    /// Only lags that are powers of two. An approximation (a lower bound of
    /// the exhaustive value), `O(m log m)` per window.
    DyadicLags,
}

impl PairSet {
    pub fn is_approximate(&self) -> bool {
        matches!(self, PairSet::DyadicLags)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in (0, 1]")))
    }
}

/// `max_{s != t} |f(t) - f(s)| / |t - s|^alpha` over a uniformly spaced sample.
///
/// `values` holds `m >= 2` points of dimension `dim`, spaced `dt` apart.
pub fn holder_seminorm_uniform(values: &[f64], dim: usize, dt: f64, alpha: f64, pairs: PairSet) -> Result<f64> {
    check_alpha(alpha)?;
    if dim == 0 || values.len() % dim != 0 {
        return Err(Error::param("dim", "values are not a whole number of points"));
    }
    let m = values.len() / dim;
    if m < 2 {
        return Err(Error::param("values", "Hölder seminorm needs at least two points"));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let mut best = 0.0f64;
    let mut lag = 1;
    while lag < m {
        let weight = (lag as f64 * dt).powf(-alpha);
        let mut widest = 0.0f64;
        if dim == 1 {
            for (a, b) in values.iter().zip(&values[lag..]) {
                widest = widest.max((b - a).abs());
            }
        } else {
            for i in 0..m - lag {
                let a = &values[i * dim..(i + 1) * dim];
                let b = &values[(i + lag) * dim..(i + lag + 1) * dim];
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
                widest = widest.max(sq);
            }
            widest = widest.sqrt();
        }
        best = best.max(widest * weight);
        lag = match pairs {
            PairSet::Exhaustive => lag + 1,
            PairSet::DyadicLags => lag * 2,
        };
    }
    Ok(best)
}

/// Seminorm of `path` restricted to grid points `lo..=hi`.
pub fn holder_seminorm(path: &Path, lo: usize, hi: usize, alpha: f64) -> Result<f64> {
    holder_seminorm_with(path, lo, hi, alpha, PairSet::Exhaustive)
}

pub fn holder_seminorm_with(path: &Path, lo: usize, hi: usize, alpha: f64, pairs: PairSet) -> Result<f64> {
    if hi >= path.len() || lo >= hi {
        return Err(Error::param("range", format!("{lo}..={hi} is not a window of {} points", path.len())));
    }
    holder_seminorm_uniform(path.slice(lo, hi), path.dim(), path.grid().dt(), alpha, pairs)
}

/// Seminorm with a caller-supplied distance between grid points `i < j`
/// (e.g. an operator norm for matrix paths).
pub fn holder_seminorm_by(m: usize, dt: f64, alpha: f64, mut dist: impl FnMut(usize, usize) -> f64) -> Result<f64> {
    check_alpha(alpha)?;
    if m < 2 {
        return Err(Error::param("m", "Hölder seminorm needs at least two points"));
    }
    let mut best = 0.0f64;
    for lag in 1..m {
        let weight = (lag as f64 * dt).powf(-alpha);
        for i in 0..m - lag {
            best = best.max(dist(i, i + lag) * weight);
        }
    }
    Ok(best)
}

/// `x*_t = max_{k <= t} ||X||_{alpha; [k, (k+1) ∧ t]}` over unit windows of `path`.
///
/// Windows with fewer than two grid points are skipped.
pub fn window_max_holder(path: &Path, alpha: f64, horizon: f64) -> Result<f64> {
    window_max_holder_with(path, alpha, horizon, PairSet::Exhaustive)
}

pub fn window_max_holder_with(path: &Path, alpha: f64, horizon: f64, pairs: PairSet) -> Result<f64> {
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon {horizon} must be >= 0")));
    }
    check_alpha(alpha)?;
    let grid = path.grid();
    let n = grid.steps_per_unit();
    let end = grid.nearest_index(horizon).min(path.len() - 1);
    let mut best = 0.0f64;
    let mut k = 0;
    while k * n < end {
        let lo = k * n;
        let hi = ((k + 1) * n).min(end);
        best = best.max(holder_seminorm_with(path, lo, hi, alpha, pairs)?);
        k += 1;
    }
    Ok(best)
}

/// Per-window seminorms `||X||_{alpha; [k, k+1]}` for every full unit window.
pub fn window_seminorms(path: &Path, alpha: f64, pairs: PairSet) -> Result<Vec<f64>> {
    let n = path.grid().steps_per_unit();
    (0..path.grid().units())
        .map(|k| holder_seminorm_with(path, k * n, (k + 1) * n, alpha, pairs))
        .collect()
}
