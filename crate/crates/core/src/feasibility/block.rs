use nalgebra::{DMatrix, DVector};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};

use super::{drive, BlockSketch, ConvergenceTrace, RowProvider, SolverConfig};
use crate::error::{OrkaError, Result};
use crate::rng;

/// Smallest accepted squared Cholesky pivot, relative to the largest Gram
/// diagonal entry.
const PIVOT_FLOOR: f64 = 1e-12;

pub(crate) fn block_rows(cfg: &SolverConfig, n: usize, d: usize) -> Result<usize> {
    match cfg.block_rows {
        Some(k) if d > 1 && k >= d => Err(OrkaError::InvalidArgument(format!("block rows k' = {k} must be < d = {d}"))),
        Some(k) => Ok(k.min(n)),
        None => Ok(d.saturating_sub(1).max(1).min(n)),
    }
}

/// Solves `G_kk w = rhs_kk` on the leading `kk × kk` block of `gram`,
/// dropping trailing rows until the Cholesky pivots clear [`PIVOT_FLOOR`].
/// Returns the kept size with the solution, and whether any row was dropped.
pub(crate) fn shrink_solve(gram: &DMatrix<f64>, rhs: &[f64]) -> (Option<(usize, DVector<f64>)>, bool) {
    let mut kk = rhs.len();
    let mut shrunk = false;
    loop {
        let g = gram.view((0, 0), (kk, kk)).into_owned();
        let max_diag = (0..kk).map(|i| g[(i, i)]).fold(0.0, f64::max);
        if let Some(ch) = g.cholesky() {
            let l = ch.l_dirty();
            let min_piv = (0..kk).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if max_diag > 0.0 && min_piv > PIVOT_FLOOR * max_diag {
                return (Some((kk, ch.solve(&DVector::from_column_slice(&rhs[..kk])))), shrunk);
            }
        }
        shrunk = true;
        if kk == 1 {
            return (None, true);
        }
        kk -= 1;
    }
}

/// Block SKM: pick block `k` with probability `‖B_k‖_F²/‖B‖_F²`, keep its
/// `k′` most violated rows `B′`, and move by `λ·B′ᵀ(B′B′ᵀ)⁻¹(b′ − B′x)⁺`.
///
/// Rows are ranked by violation `b_i − ⟨c_i, x⟩`, largest first, ties to the
/// lower index. If the Gram matrix of the selected rows is numerically
/// singular the least violated row is dropped until it factors; such
/// iterations are counted in `ConvergenceTrace::shrunk_blocks`.
pub fn block_skm_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let layout = provider.block_layout().ok_or(OrkaError::NoBlocks)?;
    let (n, d) = (layout.block_len, provider.dim());
    let kp = block_rows(cfg, n, d)?;
    let weights: Vec<f64> =
        (0..layout.blocks).map(|k| (k * n..(k + 1) * n).map(|j| provider.row_norm_sq(j)).sum()).collect();
    let sampler =
        WeightedAliasIndex::new(weights).map_err(|e| OrkaError::InvalidArgument(format!("block weights: {e}")))?;

    let mut r = rng::seeded(cfg.seed);
    let mut viol = vec![0.0; n];
    let mut raw = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut g = DMatrix::<f64>::zeros(0, 0);
    let mut sub = DMatrix::<f64>::zeros(kp, d);
    let mut rhs = vec![0.0; kp];

    drive(provider, cfg, x0, n, &mut r, |x, r, trace| {
        let k = sampler.sample(r);
        let start = k * n;
        for (i, v) in raw.iter_mut().enumerate() {
            *v = provider.rhs(start + i) - provider.row_dot(start + i, x);
        }
        match cfg.block_sketch {
            BlockSketch::Identity => viol.copy_from_slice(&raw),
            BlockSketch::Gaussian => {
                g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut *r));
                // sketched residuals Gᵀ(b − Bx)
                for (i, v) in viol.iter_mut().enumerate() {
                    *v = (0..n).map(|t| g[(t, i)] * raw[t]).sum();
                }
            }
        }
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        let by_violation = |a: &usize, b: &usize| viol[*b].total_cmp(&viol[*a]).then(a.cmp(b));
        if kp < n {
            order.select_nth_unstable_by(kp - 1, by_violation);
        }
        order[..kp].sort_unstable_by(by_violation);
        if viol[order[0]] <= 0.0 {
            return Ok(Some(k));
        }
        for (slot, &i) in order[..kp].iter().enumerate() {
            let mut row = vec![0.0; d];
            match cfg.block_sketch {
                BlockSketch::Identity => provider.row_axpy(start + i, 1.0, &mut row),
                BlockSketch::Gaussian => {
                    for t in 0..n {
                        provider.row_axpy(start + t, g[(t, i)], &mut row);
                    }
                }
            }
            sub.row_mut(slot).copy_from_slice(&row);
            rhs[slot] = viol[i].max(0.0);
        }
        let gram = &sub * sub.transpose();
        let (solved, shrunk) = shrink_solve(&gram, &rhs);
        if shrunk {
            trace.shrunk_blocks += 1;
        }
        let Some((kk, w)) = solved else {
            trace.skipped_rows += 1;
            return Ok(Some(k));
        };
        if w.iter().any(|v| !v.is_finite()) {
            return Err(OrkaError::NonFinite { iteration: 0 });
        }
        let step = sub.rows(0, kk).transpose() * w;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi += cfg.relaxation * si;
        }
        Ok(Some(k))
    })
}
