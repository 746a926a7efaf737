use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::kaczmarz::motzkin_pick;
use super::{drive, ConvergenceTrace, RowProvider, SolverConfig};
use crate::error::{OrkaError, Result};
use crate::linalg::{solve_upper, solve_upper_transpose};
use crate::rng;

/// Relative size below which a diagonal entry of R counts as zero.
const RANK_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct QrFactors {
    /// `M × d` with orthonormal columns.
    pub q: DMatrix<f64>,
    /// `d × d` upper triangular with non-negative diagonal.
    pub r: DMatrix<f64>,
}

fn thin_qr(c: &DMatrix<f64>) -> Result<QrFactors> {
    let (m, d) = c.shape();
    if m < d || d == 0 {
        return Err(OrkaError::InvalidArgument(format!("QR needs M >= d >= 1, got {m}x{d}")));
    }
    let qr = c.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    let max = (0..d).map(|i| r[(i, i)]).fold(0.0, f64::max);
    let min = (0..d).map(|i| r[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min > RANK_FLOOR * max) {
        return Err(OrkaError::RankDeficient { sigma_min: min });
    }
    Ok(QrFactors { q, r })
}

/// Thin QR of `C`, with signs fixed so that `diag(R) ≥ 0`.
pub fn qr_precondition(c: &DMatrix<f64>) -> Result<QrFactors> {
    thin_qr(c)
}

/// Triangular factor `R_s` from the QR of a Gaussian sketch `NᵀC`; the
/// preconditioned system is `C R_s⁻¹`, applied through triangular solves.
#[derive(Clone, Debug)]
pub struct SketchPreconditioner {
    pub r: DMatrix<f64>,
    pub sketch_size: usize,
}

impl SketchPreconditioner {
    /// Factor from an explicit sketch matrix `S` (`s × d`).
    pub fn from_sketch(s: &DMatrix<f64>) -> Result<Self> {
        let f = thin_qr(s)?;
        Ok(SketchPreconditioner { r: f.r, sketch_size: s.nrows() })
    }

    /// Dense `C R_s⁻¹` (small problems and diagnostics only).
    pub fn precondition(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(c.nrows(), c.ncols());
        for j in 0..c.nrows() {
            let row: Vec<f64> = c.row(j).iter().copied().collect();
            let y = solve_upper_transpose(&self.r, &row)?;
            out.set_row(j, &y.transpose());
        }
        Ok(out)
    }
}

/// Sketch `S = NᵀC` with `N` an `M × s` standard Gaussian matrix, generated
/// row by row so `C` is only streamed.
pub fn sketch_precondition<P: RowProvider + ?Sized>(
    provider: &P,
    sketch_size: usize,
    seed: u64,
) -> Result<SketchPreconditioner> {
    let (m, d) = (provider.row_count(), provider.dim());
    if sketch_size < d {
        return Err(OrkaError::InvalidArgument(format!("sketch size {sketch_size} < d = {d}")));
    }
    let mut r = rng::seeded(seed);
    let mut s = DMatrix::<f64>::zeros(sketch_size, d);
    let mut n_row = vec![0.0; sketch_size];
    let mut c = vec![0.0; d];
    for j in 0..m {
        for v in n_row.iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        c.iter_mut().for_each(|v| *v = 0.0);
        provider.row_axpy(j, 1.0, &mut c);
        for (k, &ck) in c.iter().enumerate() {
            if ck != 0.0 {
                let mut col = s.column_mut(k);
                for (i, &nv) in n_row.iter().enumerate() {
                    col[i] += nv * ck;
                }
            }
        }
    }
    SketchPreconditioner::from_sketch(&s)
}

/// SKM on `C R⁻¹ z ⪰ b`, carried out in x-coordinates (`z = R x`): residuals
/// use the original rows, steps move along `(RᵀR)⁻¹ c_j` scaled by
/// `1/‖R⁻ᵀ c_j‖²`.
pub fn preconditioned_skm<P: RowProvider + ?Sized>(
    provider: &P,
    r_factor: &DMatrix<f64>,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let (m, d) = (provider.row_count(), provider.dim());
    if r_factor.shape() != (d, d) {
        return Err(OrkaError::DimensionMismatch { expected: d, got: r_factor.nrows() });
    }
    let mut pre_norms = Vec::with_capacity(m);
    let mut c = vec![0.0; d];
    for j in 0..m {
        c.iter_mut().for_each(|v| *v = 0.0);
        provider.row_axpy(j, 1.0, &mut c);
        pre_norms.push(solve_upper_transpose(r_factor, &c)?.norm_squared());
    }
    let gamma = cfg.gamma(m);
    let mut r = rng::seeded(cfg.seed);
    drive(provider, cfg, x0, gamma, &mut r, |x, r, trace| {
        let picked = if gamma == m {
            motzkin_pick(provider, 0..m, x)
        } else {
            motzkin_pick(provider, rand::seq::index::sample(r, m, gamma).into_iter(), x)
        };
        let (j, v) = picked.expect("gamma >= 1");
        if v > 0.0 {
            if pre_norms[j] == 0.0 {
                trace.skipped_rows += 1;
                return Ok(Some(j));
            }
            c.iter_mut().for_each(|v| *v = 0.0);
            provider.row_axpy(j, 1.0, &mut c);
            let w = solve_upper_transpose(r_factor, &c)?;
            let dir = solve_upper(r_factor, w.as_slice())?;
            let coef = cfg.relaxation * v / pre_norms[j];
            if !coef.is_finite() {
                return Err(OrkaError::NonFinite { iteration: 0 });
            }
            for (xi, di) in x.iter_mut().zip(dir.iter()) {
                *xi += coef * di;
            }
        }
        Ok(Some(j))
    })
}

/// Preconditioned SKM with the exact QR factor of the materialized system.
/// Equivalent to running SKM on `Q z ⪰ b` and back-substituting `R x = z`.
pub fn prskm_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let dense = provider.materialize();
    let f = qr_precondition(&dense.matrix())?;
    preconditioned_skm(provider, &f.r, cfg, x0)
}

/// Storage-friendly PrSKM: preconditioner from a Gaussian sketch of size
/// `cfg.sketch_size` (default `4d`).
pub fn sketch_prskm_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let s = cfg.sketch_size.unwrap_or(4 * provider.dim());
    let pre = sketch_precondition(provider, s, rng::derive_seed(cfg.seed, 0x5ce7c4))?;
    preconditioned_skm(provider, &pre.r, cfg, x0)
}
