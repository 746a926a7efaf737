use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::OneBitPolyhedron;
use crate::error::{OrkaError, Result};
use crate::feasibility::{block_rows, drive_with, shrink_solve, ConvergenceTrace, SolverConfig};
use crate::linalg::axpy;
use crate::rng;

/// Largest `n` for which the `n × n` row Gram matrix is cached.
pub const GRAM_BUDGET: usize = 4096;

/// Iterations between exact recomputations of the cached `Ax`.
const REFRESH_EVERY: usize = 128;

/// Block SKM on the one-bit polyhedron using the cached `G = AAᵀ`.
///
/// Every block is `diag(r^(ℓ))A`, so the Gram matrix of any selected rows is
/// a signed submatrix of `G`, and `A x` can be updated in `O(n·k′)` from the
/// columns of `G`. The iterates match [`crate::feasibility::block_skm_solve`]
/// with the identity sketch up to rounding.
pub(crate) fn gram_block_skm(
    poly: &OneBitPolyhedron,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let meas = poly.measurements();
    let model = meas.model();
    let (n, m, d) = (meas.n(), meas.m(), meas.d());
    let kp = block_rows(cfg, n, d)?;
    let gram = model.gram();
    let block_weight: f64 = (0..n).map(|j| model.row_norm_sq(j)).sum();
    let sampler = WeightedAliasIndex::new(vec![block_weight; m])
        .map_err(|e| OrkaError::InvalidArgument(format!("block weights: {e}")))?;

    let ax = RefCell::new(model.apply(x0.as_slice()).data.as_vec().clone());
    let mut r = rng::seeded(cfg.seed);
    let mut viol = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut sub_gram = DMatrix::<f64>::zeros(kp, kp);
    let mut rhs = vec![0.0; kp];
    let mut steps = 0usize;

    let residual = |ax: &[f64]| {
        let mut worst = 0.0f64;
        for l in 0..m {
            for (j, &v) in ax.iter().enumerate() {
                let s = meas.sign(j, l) as f64;
                worst = worst.max((s * (v - meas.threshold(j, l))).min(0.0).abs());
            }
        }
        worst
    };

    drive_with(
        poly,
        cfg,
        x0,
        n,
        &mut r,
        |_| residual(&ax.borrow()),
        |x, r, trace| {
            let mut ax = ax.borrow_mut();
            steps += 1;
            if steps.is_multiple_of(REFRESH_EVERY) {
                ax.copy_from_slice(model.apply(x).as_slice());
            }
            let k = sampler.sample(r);
            for (j, v) in viol.iter_mut().enumerate() {
                *v = meas.sign(j, k) as f64 * (meas.threshold(j, k) - ax[j]);
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
            let signs: Vec<f64> = order[..kp].iter().map(|&j| meas.sign(j, k) as f64).collect();
            for s in 0..kp {
                rhs[s] = viol[order[s]].max(0.0);
                for t in 0..kp {
                    sub_gram[(s, t)] = signs[s] * signs[t] * gram[(order[s], order[t])];
                }
            }
            let (solved, shrunk) = shrink_solve(&sub_gram, &rhs);
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
            for s in 0..kk {
                let (j, coef) = (order[s], cfg.relaxation * w[s] * signs[s]);
                axpy(coef, model.row(j), x);
                axpy(coef, gram.column(j).as_slice(), &mut ax);
            }
            Ok(Some(k))
        },
    )
}
