//! Small dense linear-algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;

use crate::{Error, Result};

/// Largest condition number accepted by [`solve_symmetric`].
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance (times `‖X‖_F`) below which a pivot counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// 2-norm condition number of a symmetric matrix, from its eigenvalues.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `A X = B` for symmetric `A`; Cholesky when `A` is positive definite, LU
/// otherwise. Fails with [`Error::Singular`] when `cond(A) > 1e12`.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::Singular { condition })
}

pub fn solve_symmetric_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_symmetric(a, &bm)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// `(A + Aᵀ)/2`
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Columns of `x` that are linearly dependent on the others, found by column-pivoted
/// QR with pivot tolerance `1e-10·‖X‖_F`. Empty when `x` has full column rank.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let p = x.ncols();
    let norm = x.norm();
    if p == 0 {
        return Vec::new();
    }
    if norm == 0.0 {
        return (0..p).collect();
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    // recover the pivot order by permuting a row of column labels
    let mut labels = DMatrix::from_fn(1, p, |_, j| j as f64);
    qr.p().permute_columns(&mut labels);
    let tol = RANK_TOL * norm;
    let k = r.nrows().min(p);
    let mut out: Vec<usize> = (0..p)
        .filter(|&j| j >= k || r[(j, j)].abs() <= tol)
        .map(|j| labels[(0, j)] as usize)
        .collect();
    out.sort_unstable();
    out
}

/// Ordinary least squares: coefficients and residual standard deviation
/// `sqrt(RSS / (n − p))`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InvalidData("ordinary least squares needs n > p".into()));
    }
    let dep = dependent_columns(x);
    if !dep.is_empty() {
        return Err(Error::RankDeficient { columns: dep });
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => x
            .clone()
            .svd(true, true)
            .solve(y, 1e-14)
            .map_err(|e| Error::Numerical(e.into()))?,
    };
    let resid = y - x * &beta;
    let sd = (resid.norm_squared() / (n - p) as f64).sqrt();
    Ok((beta, sd))
}

/// Symmetric positive semi-definiteness up to `−tol·trace` on the smallest eigenvalue.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    let trace = a.trace().abs();
    let eig = a.clone().symmetric_eigen();
    eig.eigenvalues.iter().all(|&v| v >= -tol * trace)
}
