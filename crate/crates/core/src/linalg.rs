//! Small dense helpers shared by the solvers.

use crate::error::{OrkaError, Result};
use nalgebra::{DMatrix, DVector};

/// Dot product with four independent accumulators, which lets the compiler
/// vectorize the loop.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solves `R x = b` for upper-triangular `R` (back substitution).
pub fn solve_upper(r: &DMatrix<f64>, b: &[f64]) -> Result<DVector<f64>> {
    let d = r.ncols();
    if r.nrows() < d || b.len() != d {
        return Err(OrkaError::DimensionMismatch { expected: d, got: b.len() });
    }
    let mut x = DVector::from_column_slice(b);
    for i in (0..d).rev() {
        let mut s = x[i];
        for k in i + 1..d {
            s -= r[(i, k)] * x[k];
        }
        let piv = r[(i, i)];
        if piv == 0.0 || !piv.is_finite() {
            return Err(OrkaError::SingularFactor { index: i });
        }
        x[i] = s / piv;
    }
    Ok(x)
}

/// Solves `Rᵀ y = b` for upper-triangular `R` (forward substitution).
pub fn solve_upper_transpose(r: &DMatrix<f64>, b: &[f64]) -> Result<DVector<f64>> {
    let d = r.ncols();
    if r.nrows() < d || b.len() != d {
        return Err(OrkaError::DimensionMismatch { expected: d, got: b.len() });
    }
    let mut y = DVector::from_column_slice(b);
    for i in 0..d {
        let mut s = y[i];
        for k in 0..i {
            s -= r[(k, i)] * y[k];
        }
        let piv = r[(i, i)];
        if piv == 0.0 || !piv.is_finite() {
            return Err(OrkaError::SingularFactor { index: i });
        }
        y[i] = s / piv;
    }
    Ok(y)
}

/// Singular values in descending order.
pub fn singular_values(c: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = c.clone().try_svd(false, false, f64::EPSILON, 0).ok_or(OrkaError::SvdFailed)?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Ratio σ_max/σ_min over the first `ncols` singular values.
pub fn condition_number(c: &DMatrix<f64>) -> Result<f64> {
    let s = singular_values(c)?;
    let min = *s.last().ok_or(OrkaError::InvalidArgument("empty matrix".into()))?;
    if min <= 0.0 {
        return Err(OrkaError::RankDeficient { sigma_min: min });
    }
    Ok(s[0] / min)
}
