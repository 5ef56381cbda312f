//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-eigenvalue threshold for positive definiteness.
pub const TOL_PD: f64 = 1e-10;

pub fn is_square(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols()
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !is_square(m) {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

pub fn is_pd(m: &DMatrix<f64>) -> bool {
    is_symmetric(m) && min_eigenvalue(m) > TOL_PD
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    is_symmetric(m) && min_eigenvalue(m) >= -TOL_PD
}

/// Returns `L` with `L Lᵀ = m` for a symmetric PSD `m`; negative rounding
/// noise in the spectrum is clipped to zero.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
pub fn solve_pd(a: &DMatrix<f64>, b: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::Singular(name))?;
    Ok(chol.solve(b))
}

/// Solves the general square system `a x = b` by LU.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    a.clone().lu().solve(b).ok_or(Error::Singular(name))
}

pub fn inverse(a: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or(Error::Singular(name))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn sup_norm(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking vectorisation.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<f64>, nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}

/// Numerical rank from singular values with threshold `n·σmax·1e-12`.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * smax * 1e-12;
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Log-log least-squares slope; a sequence that is identically zero has slope 0.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    if ys.iter().all(|&y| y == 0.0) {
        return 0.0;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
    ls_slope(&lx, &ly)
}
