use nalgebra::DVector;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::{drive, project_row, ConvergenceTrace, RowProvider, RowUpdate, SolverConfig};
use crate::error::{OrkaError, Result};
use crate::rng;

/// Row sampler with probabilities `‖c_j‖²/‖C‖_F²`.
pub(crate) fn norm_sampler<P: RowProvider + ?Sized>(p: &P) -> Result<WeightedAliasIndex<f64>> {
    let w: Vec<f64> = (0..p.row_count()).map(|j| p.row_norm_sq(j)).collect();
    WeightedAliasIndex::new(w).map_err(|e| OrkaError::InvalidArgument(format!("row weights: {e}")))
}

fn record(trace: &mut ConvergenceTrace, u: RowUpdate) {
    if let RowUpdate::ZeroRow = u {
        trace.skipped_rows += 1;
    }
}

/// Randomized Kaczmarz: row `j` with probability `‖c_j‖²/‖C‖_F²`, then a
/// relaxed projection onto its half-space (or hyperplane for equality rows).
pub fn rka_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let sampler = norm_sampler(provider)?;
    let mut r = rng::seeded(cfg.seed);
    drive(provider, cfg, x0, 1, &mut r, |x, r, trace| {
        let j = sampler.sample(r);
        record(trace, project_row(provider, j, x, cfg.relaxation)?);
        Ok(Some(j))
    })
}

/// Index of the largest positive residual among `rows`, lowest index on ties.
pub(crate) fn motzkin_pick<P: RowProvider + ?Sized>(
    p: &P,
    rows: impl Iterator<Item = usize>,
    x: &[f64],
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for j in rows {
        let v = p.rhs(j) - p.row_dot(j, x);
        best = match best {
            Some((bj, bv)) if v < bv || (v == bv && j > bj) => Some((bj, bv)),
            _ => Some((j, v)),
        };
    }
    best
}

/// Sampling Kaczmarz–Motzkin: draw γ rows uniformly without replacement and
/// project onto the most violated one. Every row is treated as an inequality.
pub fn skm_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let m = provider.row_count();
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
            let nrm = provider.row_norm_sq(j);
            if nrm == 0.0 {
                trace.skipped_rows += 1;
            } else {
                let coef = cfg.relaxation * v / nrm;
                if !coef.is_finite() {
                    return Err(OrkaError::NonFinite { iteration: 0 });
                }
                provider.row_axpy(j, coef, x);
            }
        }
        Ok(Some(j))
    })
}

/// Nearest-rank q-quantile: the `⌈qM⌉`-th smallest value (at least the first).
pub fn quantile_threshold(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let k = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let (_, v, _) = values.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    *v
}

/// Quantile-gated Kaczmarz: the sampled row is only used when its absolute
/// residual reaches the q-quantile of all absolute residuals, so rows sitting
/// close to their hyperplane (the ones noise can flip) are left out.
pub fn quantile_rka_solve<P: RowProvider + ?Sized>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let sampler = norm_sampler(provider)?;
    let m = provider.row_count();
    let mut r = rng::seeded(cfg.seed);
    let mut abs_res = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    drive(provider, cfg, x0, m, &mut r, |x, r, trace| {
        for (j, slot) in abs_res.iter_mut().enumerate() {
            *slot = (provider.row_dot(j, x) - provider.rhs(j)).abs();
        }
        scratch.copy_from_slice(&abs_res);
        let q = quantile_threshold(&mut scratch, cfg.quantile);
        let j = sampler.sample(r);
        if abs_res[j] >= q {
            record(trace, project_row(provider, j, x, cfg.relaxation)?);
        }
        Ok(Some(j))
    })
}

/// Expected-error bound for Kaczmarz on a perturbed system:
/// `(1 − 1/κ²)^{i/2}·e₀ + κ·γ_max`, where `γ_j = |n_j|/‖c_j‖`.
pub fn noisy_rka_error_bound(kappa: f64, x0_err: f64, iter: u64, gamma_max: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(OrkaError::InvalidArgument(format!("kappa {kappa} < 1")));
    }
    let rate = 1.0 - 1.0 / (kappa * kappa);
    Ok(rate.powf(iter as f64 / 2.0) * x0_err + kappa * gamma_max)
}
