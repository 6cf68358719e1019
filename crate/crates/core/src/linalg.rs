//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Spectral norm `sqrt(lambda_max(A^T A))`.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].abs();
    }
    a.singular_values().max()
}

/// Eigen-decomposition of a matrix that must be symmetric (to `1e-12` relative)
/// and positive definite.
pub fn spd_eigen(kappa: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !kappa.is_square() || kappa.nrows() == 0 {
        return Err(Error::NotPositiveDefinite(format!(
            "{}x{} matrix is not square",
            kappa.nrows(),
            kappa.ncols()
        )));
    }
    let scale = kappa.amax().max(1.0);
    let asym = (kappa - kappa.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite(format!("asymmetry {asym:e}")));
    }
    let sym = (kappa + kappa.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min:e}")));
    }
    Ok(eig)
}

/// Symmetric square root of an SPD matrix.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(m)?;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Inverse of an SPD matrix via its eigen-decomposition.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(m)?;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `Q diag(f(lambda_i)) Q^T` for a symmetric matrix decomposition.
pub fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::param("matrix", "rows must be non-empty and of equal length"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn to_vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
