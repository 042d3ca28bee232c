//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative pivot size below which a complex LU factorization counts as singular.
const PIVOT_TOL: f64 = 1e-14;

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

/// max |m - mᵀ| relative to max |m| (zero for an all-zero matrix).
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(m - m.transpose())) / scale
}

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{what} is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(m, what)?;
    let a = asymmetry(m);
    if a > 1e-12 {
        return Err(Error::Shape(format!("{what} is not symmetric (relative asymmetry {a:e})")));
    }
    Ok(())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(m);
    vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `D^{-1/2} m D^{-1/2}` with `D = diag(m)`; zero diagonal entries are left unscaled.
pub fn equilibrate(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let d = DVector::from_iterator(
        m.nrows(),
        (0..m.nrows()).map(|i| if m[(i, i)] > 0.0 { 1.0 / m[(i, i)].sqrt() } else { 1.0 }),
    );
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j]);
    (scaled, d)
}

/// Inverse of a symmetric positive definite matrix via Cholesky of the
/// diagonally equilibrated matrix (entries may span fF to F).
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let s = symmetrize(m);
    let (scaled, d) = equilibrate(&s);
    match scaled.cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            Ok(symmetrize(&DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| d[i] * inv[(i, j)] * d[j])))
        }
        None => Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            min_eigenvalue: min_eigenvalue(&s),
        }),
    }
}

/// Symmetric-part extraction followed by a positive-definiteness check.
///
/// A matrix whose smallest eigenvalue lies within `-1e-12 * trace` of zero is clamped
/// onto the PSD boundary (negative eigenvalues set to zero) with a warning.
pub fn spd_check(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let s = symmetrize(m);
    if s.nrows() == 0 || s.clone().cholesky().is_some() {
        return Ok(s);
    }
    let (vals, vecs) = sym_eigen(&s);
    let trace: f64 = vals.iter().map(|v| v.abs()).sum();
    let min = vals[0];
    if min >= -1e-12 * trace {
        log::warn!("{what}: smallest eigenvalue {min:e} clamped to the PSD boundary");
        let clamped = DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(0.0)));
        return Ok(symmetrize(&(&vecs * DMatrix::from_diagonal(&clamped) * vecs.transpose())));
    }
    Err(Error::NotPositiveDefinite { what: what.to_string(), min_eigenvalue: min })
}

/// Complex inverse that refuses numerically singular inputs.
pub fn checked_inverse(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    if n == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > PIVOT_TOL * max) {
        return None;
    }
    lu.try_inverse()
}

/// Unit vector spanning the (numerical) null space of a square complex matrix.
pub fn null_vector(m: &CMat) -> DVector<C64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    DVector::from_iterator(m.ncols(), v_t.row(imin).iter().map(|z| z.conj()))
}

/// Flip the sign of `v` so its largest-magnitude entry is positive.
pub fn sign_normalize(v: &mut DVector<f64>) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.neg_mut();
    }
}

/// Submatrix on the given row and column index lists.
pub fn select<T: nalgebra::Scalar>(
    m: &DMatrix<T>,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])].clone())
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Numerical rank with singular values below `rel_tol * sigma_max` counted as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> (usize, DVector<f64>) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > rel_tol * max).count();
    (rank, sv)
}
