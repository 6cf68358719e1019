use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::op_norm;
use crate::noise::{holder_seminorm, holder_seminorm_by, Grid, Path};

/// A `rows x cols` matrix-valued path on a grid, stored row-major per point.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPath {
    grid: Grid,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MatrixPath {
    pub fn from_fn(grid: Grid, rows: usize, cols: usize, mut f: impl FnMut(f64) -> DMatrix<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * rows * cols);
        for i in 0..grid.len() {
            let m = f(grid.time(i));
            if m.shape() != (rows, cols) {
                return Err(Error::GridMismatch(format!(
                    "integrand returned {:?}, expected ({rows}, {cols})",
                    m.shape()
                )));
            }
            for r in 0..rows {
                for c in 0..cols {
                    values.push(m[(r, c)]);
                }
            }
        }
        Ok(Self {
            grid,
            rows,
            cols,
            values,
        })
    }

    /// `weight(t) * matrix`.
    pub fn scaled(grid: Grid, matrix: &DMatrix<f64>, weight: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, matrix.nrows(), matrix.ncols(), |t| matrix * weight(t))
    }

    pub fn scalar(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, 1, 1, |t| DMatrix::from_element(1, 1, f(t)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major entries at grid point `i`.
    pub fn raw(&self, i: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, self.raw(i))
    }
}

fn check_pair(integrand: &MatrixPath, driver: &Path, lo: usize, hi: usize) -> Result<()> {
    if integrand.grid() != driver.grid() {
        return Err(Error::GridMismatch("integrand and driver use different grids".into()));
    }
    if integrand.cols != driver.dim() {
        return Err(Error::GridMismatch(format!(
            "integrand has {} columns, driver has dimension {}",
            integrand.cols,
            driver.dim()
        )));
    }
    if lo > hi || hi >= driver.len() {
        return Err(Error::param("range", format!("{lo}..={hi} outside {} points", driver.len())));
    }
    Ok(())
}

/// Left-point sum `sum_k sigma_{t_k} (X_{t_{k+1}} - X_{t_k})` over grid points `lo..=hi`.
pub fn young_integral(integrand: &MatrixPath, driver: &Path, lo: usize, hi: usize) -> Result<DVector<f64>> {
    check_pair(integrand, driver, lo, hi)?;
    let (rows, cols) = integrand.shape();
    let mut acc = DVector::zeros(rows);
    for k in lo..hi {
        let s = integrand.raw(k);
        let (a, b) = (driver.at(k), driver.at(k + 1));
        for r in 0..rows {
            let mut v = 0.0;
            for c in 0..cols {
                v += s[r * cols + c] * (b[c] - a[c]);
            }
            acc[r] += v;
        }
    }
    Ok(acc)
}

/// `K(alpha, beta) = 1 / (1 - 2^{1 - (alpha + beta)})`, finite iff `alpha + beta > 1`.
pub fn sewing_constant(alpha: f64, beta: f64) -> Result<f64> {
    let s = alpha + beta;
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::param("alpha + beta", format!("{s} must exceed 1")));
    }
    Ok(1.0 / (1.0 - (1.0 - s).exp2()))
}

/// Defect of the one-term approximation together with its a-priori bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoeveDefect {
    /// `|int_s^t sigma dX - sigma_s X_{s,t}|`.
    pub defect: f64,
    /// `K (t-s)^{alpha+beta} ||X||_alpha ||sigma||_beta`.
    pub bound: f64,
    pub constant: f64,
    pub driver_seminorm: f64,
    pub integrand_seminorm: f64,
}

/// Evaluates the defect and its bound on grid points `lo..=hi`; seminorms are
/// exhaustive grid seminorms, with the operator norm for matrix increments.
pub fn young_loeve_defect(
    integrand: &MatrixPath,
    integrand_exponent: f64,
    driver: &Path,
    alpha: f64,
    lo: usize,
    hi: usize,
) -> Result<LoeveDefect> {
    let constant = sewing_constant(alpha, integrand_exponent)?;
    check_pair(integrand, driver, lo, hi)?;
    if hi - lo < 1 {
        return Err(Error::param("range", "window needs at least two grid points"));
    }
    let integral = young_integral(integrand, driver, lo, hi)?;
    let (rows, cols) = integrand.shape();
    let s = integrand.raw(lo);
    let (a, b) = (driver.at(lo), driver.at(hi));
    let mut defect = 0.0;
    for r in 0..rows {
        let mut v = 0.0;
        for c in 0..cols {
            v += s[r * cols + c] * (b[c] - a[c]);
        }
        defect += (integral[r] - v).powi(2);
    }
    let defect = defect.sqrt();
    let dt = driver.grid().dt();
    let driver_seminorm = holder_seminorm(driver, lo, hi, alpha)?;
    let integrand_seminorm = if rows * cols == 1 {
        holder_seminorm_by(hi - lo + 1, dt, integrand_exponent, |i, j| {
            (integrand.raw(lo + j)[0] - integrand.raw(lo + i)[0]).abs()
        })?
    } else {
        holder_seminorm_by(hi - lo + 1, dt, integrand_exponent, |i, j| {
            op_norm(&(integrand.at(lo + j) - integrand.at(lo + i)))
        })?
    };
    let length = (hi - lo) as f64 * dt;
    Ok(LoeveDefect {
        defect,
        bound: constant * length.powf(alpha + integrand_exponent) * driver_seminorm * integrand_seminorm,
        constant,
        driver_seminorm,
        integrand_seminorm,
    })
}
