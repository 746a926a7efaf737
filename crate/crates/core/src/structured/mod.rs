//! Structured recovery: low-rank matrix sensing and one-bit compressed
//! sensing on top of the polyhedron solvers, plus comparison baselines.

mod matrix;
mod sparse;

pub use matrix::{
    factorized_orka_solve, hsvt_baseline, matrix_rka_step, svp_orka_observe, svp_orka_solve, FactorPair,
    FactorizedConfig, HsvtConfig, MatrixSensingProblem,
};
pub use sparse::{
    back_projection_init, biht_baseline, ht_orka_observe, ht_orka_solve, st_orka_solve, BihtConfig, CsConfig, CsProblem,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};

/// `S_t(x) = sgn(x)·(|x| − t)⁺`, entrywise.
pub fn soft_threshold(x: &[f64], t: f64) -> Vec<f64> {
    x.iter().map(|&v| v.signum() * (v.abs() - t).max(0.0)).collect()
}

/// Indices of the `s` largest-magnitude entries, ties to the lower index.
pub fn top_s_indices(x: &[f64], s: usize) -> Vec<usize> {
    let s = s.min(x.len());
    let mut idx: Vec<usize> = (0..x.len()).collect();
    let cmp = |a: &usize, b: &usize| x[*b].abs().total_cmp(&x[*a].abs()).then(a.cmp(b));
    if s > 0 && s < x.len() {
        idx.select_nth_unstable_by(s - 1, cmp);
    }
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// `T_s`: keep the `s` largest-magnitude entries, zero the rest.
pub fn hard_threshold(x: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in top_s_indices(x, s) {
        out[i] = x[i];
    }
    out
}

/// Thin SVD with singular triplets sorted by decreasing singular value.
fn sorted_svd(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = x.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(OrkaError::SvdFailed)?;
    let u = svd.u.ok_or(OrkaError::SvdFailed)?;
    let vt = svd.v_t.ok_or(OrkaError::SvdFailed)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let k = order.len();
    let mut us = DMatrix::zeros(u.nrows(), k);
    let mut vs = DMatrix::zeros(k, vt.ncols());
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_row(dst, &vt.row(src));
        s.push(svd.singular_values[src]);
    }
    Ok((us, s, vs))
}

/// Rebuilds `Σ_k u_k f(σ_k) v_kᵀ` over the first `keep` triplets.
fn rebuild(u: &DMatrix<f64>, s: &[f64], vt: &DMatrix<f64>, keep: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.nrows(), vt.ncols());
    for k in 0..keep.min(s.len()) {
        if s[k] != 0.0 {
            out += u.column(k) * vt.row(k) * s[k];
        }
    }
    out
}

/// `P_r`: best rank-`r` approximation in Frobenius norm.
pub fn svp_project(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    if r >= x.nrows().min(x.ncols()) {
        return Ok(x.clone());
    }
    let (u, s, vt) = sorted_svd(x)?;
    Ok(rebuild(&u, &s, &vt, r))
}

/// Soft thresholding of the singular values.
pub fn svt(x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let (u, s, vt) = sorted_svd(x)?;
    let shrunk: Vec<f64> = s.iter().map(|v| (v - t).max(0.0)).collect();
    Ok(rebuild(&u, &shrunk, &vt, shrunk.len()))
}

/// Numerical rank: singular values above `rel_tol·σ_max`.
pub fn numerical_rank(x: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let (_, s, _) = sorted_svd(x)?;
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v > rel_tol * top && v > 0.0).count())
}

/// Projection-type operators used between Kaczmarz steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Thresholder {
    Soft { t: f64 },
    Hard { s: usize },
    Svp { r: usize },
    Svt { t: f64 },
}

impl Thresholder {
    /// Applies the operator to a vector (`Soft`, `Hard`) or to the
    /// column-major `rows × (len/rows)` matrix it encodes (`Svp`, `Svt`).
    pub fn apply(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        match *self {
            Thresholder::Soft { t } => Ok(soft_threshold(x, t)),
            Thresholder::Hard { s } => Ok(hard_threshold(x, s)),
            Thresholder::Svp { .. } | Thresholder::Svt { .. } if rows == 0 || !x.len().is_multiple_of(rows) => {
                Err(OrkaError::InvalidArgument("matrix shape does not divide the buffer".into()))
            }
            Thresholder::Svp { r } => {
                let m = DMatrix::from_column_slice(rows, x.len() / rows, x);
                Ok(svp_project(&m, r)?.as_slice().to_vec())
            }
            Thresholder::Svt { t } => {
                let m = DMatrix::from_column_slice(rows, x.len() / rows, x);
                Ok(svt(&m, t)?.as_slice().to_vec())
            }
        }
    }
}
