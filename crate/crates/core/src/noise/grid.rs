use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid over `[0, units * scale]` with `steps_per_unit` cells per unit.
///
/// Every multiple of `scale` (an epoch boundary) is a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    steps_per_unit: usize,
    units: usize,
    scale: f64,
}

impl Grid {
    pub fn new(units: usize, steps_per_unit: usize) -> Result<Self> {
        Self::scaled(units, steps_per_unit, 1.0)
    }

    pub fn scaled(units: usize, steps_per_unit: usize, scale: f64) -> Result<Self> {
        if steps_per_unit == 0 {
            return Err(Error::param("steps_per_unit", "a grid needs at least two points per unit"));
        }
        if units == 0 {
            return Err(Error::param("units", "a grid must cover at least one unit"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("scale", format!("{scale} must be positive")));
        }
        Ok(Self {
            steps_per_unit,
            units,
            scale,
        })
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of grid points (cells + 1).
    pub fn len(&self) -> usize {
        self.units * self.steps_per_unit + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.scale / self.steps_per_unit as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.scale * (i as f64 / self.steps_per_unit as f64)
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Index of the grid point nearest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let x = (t / self.scale * self.steps_per_unit as f64).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.len() - 1)
        }
    }

    /// Same cells with the unit stretched to `scale`.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Grid::scaled(self.units, self.steps_per_unit, scale)
    }

    /// Every `factor`-th point of this grid.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps_per_unit % factor != 0 {
            return Err(Error::param(
                "factor",
                format!("{factor} does not divide {} steps per unit", self.steps_per_unit),
            ));
        }
        Grid::scaled(self.units, self.steps_per_unit / factor, self.scale)
    }
}

/// Vector-valued samples on a [`Grid`], stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be >= 1"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for {} points of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Result<Self> {
        Path::new(grid, dim, vec![0.0; grid.len() * dim])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.len() * dim];
        for (i, chunk) in values.chunks_exact_mut(dim).enumerate() {
            f(grid.time(i), chunk);
        }
        Path::new(grid, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values on points `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> &[f64] {
        &self.values[lo * self.dim..(hi + 1) * self.dim]
    }

    /// Restriction to every `factor`-th point.
    pub fn coarsened(&self, factor: usize) -> Result<Path> {
        let grid = self.grid.coarsened(factor)?;
        let mut values = Vec::with_capacity(grid.len() * self.dim);
        for i in 0..grid.len() {
            values.extend_from_slice(self.at(i * factor));
        }
        Path::new(grid, self.dim, values)
    }

    /// Coordinate `k` as a scalar path.
    pub fn component(&self, k: usize) -> Result<Path> {
        if k >= self.dim {
            return Err(Error::param("k", format!("coordinate {k} >= dim {}", self.dim)));
        }
        let values = self.values.iter().skip(k).step_by(self.dim).copied().collect();
        Path::new(self.grid, 1, values)
    }
}
