use nalgebra::DVector;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::matrix::mismatch_gradient;
use super::{hard_threshold, soft_threshold, top_s_indices};
use crate::error::{OrkaError, Result};
use crate::feasibility::{drive, project_row, ConvergenceTrace, RowProvider, RowUpdate, SolverConfig};
use crate::linalg::norm_sq;
use crate::orka::{build_polyhedron, OneBitPolyhedron};
use crate::rng;
use crate::sensing::OneBitMeasurements;

/// One-bit compressed sensing of an `s`-sparse vector.
#[derive(Clone, Debug)]
pub struct CsProblem {
    poly: OneBitPolyhedron,
    sparsity: usize,
}

impl CsProblem {
    pub fn new(meas: OneBitMeasurements, sparsity: usize) -> Result<Self> {
        if sparsity == 0 || sparsity > meas.d() {
            return Err(OrkaError::InvalidArgument(format!("sparsity {sparsity} outside 1..={}", meas.d())));
        }
        Ok(CsProblem { poly: build_polyhedron(&meas), sparsity })
    }

    pub fn measurements(&self) -> &OneBitMeasurements {
        self.poly.measurements()
    }

    pub fn polyhedron(&self) -> &OneBitPolyhedron {
        &self.poly
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsConfig {
    pub solver: SolverConfig,
    /// Soft-threshold level is `st_scale · median|z|`.
    pub st_scale: f64,
    /// Rescale every iterate to unit norm (ditherless sensing, where only
    /// the direction is identifiable).
    pub normalize: bool,
    /// Starting point; defaults to zero, or the back-projection when
    /// `normalize` is set since the origin is a fixed point of the cone.
    #[serde(skip)]
    pub x0: Option<DVector<f64>>,
}

impl Default for CsConfig {
    fn default() -> Self {
        CsConfig { solver: SolverConfig::default(), st_scale: 1.0, normalize: false, x0: None }
    }
}

/// `T_s(Σ_g c_g)/‖·‖`, the normalized hard-thresholded back-projection.
pub fn back_projection_init(problem: &CsProblem) -> DVector<f64> {
    let poly = &problem.poly;
    let mut acc = vec![0.0; poly.dim()];
    for g in 0..poly.row_count() {
        poly.row_axpy(g, 1.0, &mut acc);
    }
    let mut x = hard_threshold(&acc, problem.sparsity);
    normalize_in_place(&mut x);
    DVector::from_vec(x)
}

fn normalize_in_place(x: &mut [f64]) {
    let nrm = norm_sq(x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

fn support_of(x: &[f64]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] != 0.0).collect()
}

fn start_point(problem: &CsProblem, cfg: &CsConfig) -> Result<DVector<f64>> {
    match &cfg.x0 {
        Some(x) if x.len() != problem.dim() => {
            Err(OrkaError::DimensionMismatch { expected: problem.dim(), got: x.len() })
        }
        Some(x) => Ok(x.clone()),
        None if cfg.normalize => Ok(back_projection_init(problem)),
        None => Ok(DVector::zeros(problem.dim())),
    }
}

fn thresholded_orka<T, F>(
    problem: &CsProblem,
    cfg: &CsConfig,
    mut threshold: T,
    mut observer: F,
) -> Result<(DVector<f64>, ConvergenceTrace)>
where
    T: FnMut(&[f64]) -> Vec<f64>,
    F: FnMut(usize, &[f64]),
{
    let poly = &problem.poly;
    let w: Vec<f64> = (0..poly.row_count()).map(|g| poly.row_norm_sq(g)).collect();
    let sampler = rand_distr::weighted::WeightedAliasIndex::new(w)
        .map_err(|e| OrkaError::InvalidArgument(format!("row weights: {e}")))?;
    let mut r = rng::seeded(cfg.solver.seed);
    let x0 = start_point(problem, cfg)?;
    let mut it = 0usize;
    drive(poly, &cfg.solver, &x0, 1, &mut r, |x, r, trace| {
        let g = sampler.sample(r);
        it += 1;
        match project_row(poly, g, x, cfg.solver.relaxation)? {
            RowUpdate::Moved => {
                let before = support_of(x);
                let mut z = threshold(x);
                if cfg.normalize {
                    normalize_in_place(&mut z);
                }
                x.copy_from_slice(&z);
                if support_of(x) != before {
                    trace.support_changes += 1;
                }
            }
            RowUpdate::ZeroRow => trace.skipped_rows += 1,
            RowUpdate::Satisfied => {}
        }
        observer(it, x);
        Ok(Some(g))
    })
}

/// HT-ORKA with a callback on every post-threshold iterate.
pub fn ht_orka_observe<F: FnMut(usize, &[f64])>(
    problem: &CsProblem,
    cfg: &CsConfig,
    observer: F,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    let s = problem.sparsity;
    thresholded_orka(problem, cfg, |z| hard_threshold(z, s), observer)
}

/// Kaczmarz step followed by hard thresholding to the `s` largest entries.
pub fn ht_orka_solve(problem: &CsProblem, cfg: &CsConfig) -> Result<(DVector<f64>, ConvergenceTrace)> {
    ht_orka_observe(problem, cfg, |_, _| {})
}

/// Kaczmarz step followed by soft thresholding at `st_scale · median|z|`.
pub fn st_orka_solve(problem: &CsProblem, cfg: &CsConfig) -> Result<(DVector<f64>, ConvergenceTrace)> {
    if !(cfg.st_scale >= 0.0 && cfg.st_scale.is_finite()) {
        return Err(OrkaError::InvalidArgument("st_scale must be finite and non-negative".into()));
    }
    let c = cfg.st_scale;
    thresholded_orka(
        problem,
        cfg,
        |z| {
            let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
            let mid = mags.len() / 2;
            let (_, med, _) = mags.select_nth_unstable_by(mid, f64::total_cmp);
            soft_threshold(z, c * *med)
        },
        |_, _| {},
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BihtConfig {
    pub iters: usize,
    /// Step η; `None` means `2·max|τ|` with dithers and `√(2π)` without.
    pub step: Option<f64>,
    /// Project each iterate onto the unit sphere (NBIHT).
    pub normalize: bool,
}

impl Default for BihtConfig {
    fn default() -> Self {
        BihtConfig { iters: 100, step: None, normalize: false }
    }
}

/// Binary iterative hard thresholding `x ← T_s(x + η·∇)` on the
/// sign-mismatch gradient `(1/m′)·Σ_{violated g} c_g`. Returns the iterate
/// with the fewest mismatches.
pub fn biht_baseline(problem: &CsProblem, cfg: &BihtConfig) -> Result<DVector<f64>> {
    let poly = &problem.poly;
    let eta = match cfg.step {
        Some(e) => e,
        None if cfg.normalize => (2.0 * std::f64::consts::PI).sqrt(),
        None => 2.0 * problem.measurements().thresholds().iter().fold(0.0f64, |a, t| a.max(t.abs())),
    };
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(OrkaError::InvalidArgument(format!("BIHT step {eta} must be positive")));
    }
    let mut x = if cfg.normalize { back_projection_init(problem) } else { DVector::zeros(poly.dim()) };
    let (mut best, mut best_count) = (x.clone(), usize::MAX);
    for _ in 0..=cfg.iters {
        let (grad, count) = mismatch_gradient(poly, x.as_slice());
        if count < best_count {
            best_count = count;
            best = x.clone();
        }
        if count == 0 {
            break;
        }
        let z: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + eta * g).collect();
        let mut next = hard_threshold(&z, problem.sparsity);
        if cfg.normalize {
            normalize_in_place(&mut next);
        }
        x = DVector::from_vec(next);
    }
    debug_assert!(top_s_indices(best.as_slice(), problem.sparsity).len() <= problem.sparsity);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sensing::*;

    fn problem(n: usize, d: usize, s: usize, m: usize, law: DitherLaw, seed: u64) -> (CsProblem, StructuredSignal) {
        let model = Arc::new(gen_gaussian_model(n, d, seed).unwrap());
        let mut x = gen_signal(SignalRole::Sparse { d, s }, seed + 1).unwrap();
        if law == DitherLaw::Zero {
            x = x.normalized().unwrap();
        }
        let meas = quantize(&model, &x, &DitherConfig::new(law, m), &NoiseConfig::None, seed + 2).unwrap();
        (CsProblem::new(meas, s).unwrap(), x)
    }

    fn nmse(a: &DVector<f64>, x: &DVector<f64>) -> f64 {
        (a - x).norm_squared() / x.norm_squared()
    }

    #[test]
    fn ht_keeps_sparsity() {
        let (p, x) = problem(200, 40, 3, 2, DitherLaw::UniformDynamicRange, 1);
        let cfg = CsConfig { solver: SolverConfig::default().with_max_iters(2000), ..Default::default() };
        let mut worst = 0;
        let (est, trace) = ht_orka_observe(&p, &cfg, |_, it| worst = worst.max(support_of(it).len())).unwrap();
        assert!(worst <= 3);
        assert!(nmse(&est, x.values()) < 0.1, "nmse {}", nmse(&est, x.values()));
        assert!(trace.support_changes > 0);
    }

    #[test]
    fn ditherless_ht_stays_on_sphere() {
        let (p, x) = problem(300, 40, 3, 1, DitherLaw::Zero, 2);
        let cfg =
            CsConfig { normalize: true, solver: SolverConfig::default().with_max_iters(3000), ..Default::default() };
        let mut off = 0.0f64;
        let (est, _) = ht_orka_observe(&p, &cfg, |_, it| off = off.max((norm_sq(it).sqrt() - 1.0).abs())).unwrap();
        assert!(off < 1e-12);
        assert!(nmse(&est, x.values()) < 0.2);
    }

    #[test]
    fn back_projection_points_at_truth() {
        let (p, x) = problem(2000, 30, 2, 1, DitherLaw::Zero, 3);
        let b = back_projection_init(&p);
        assert!((b.norm() - 1.0).abs() < 1e-12);
        assert!(b.dot(x.values()) > 0.8);
    }

    #[test]
    fn st_converges_on_easy_instance() {
        let (p, x) = problem(300, 30, 3, 2, DitherLaw::UniformDynamicRange, 4);
        let cfg = CsConfig { solver: SolverConfig::default().with_max_iters(3000), ..Default::default() };
        let (est, _) = st_orka_solve(&p, &cfg).unwrap();
        assert!(nmse(&est, x.values()) < 0.5);
        assert!(st_orka_solve(&p, &CsConfig { st_scale: -1.0, ..cfg }).is_err());
    }

    #[test]
    fn biht_improves_on_zero() {
        let (p, x) = problem(400, 40, 3, 1, DitherLaw::UniformDynamicRange, 5);
        let est = biht_baseline(&p, &BihtConfig::default()).unwrap();
        assert!(nmse(&est, x.values()) < 1.0);
        assert!(support_of(est.as_slice()).len() <= 3);
        let (q, y) = problem(400, 40, 3, 1, DitherLaw::Zero, 6);
        let est = biht_baseline(&q, &BihtConfig { normalize: true, ..Default::default() }).unwrap();
        assert!((est.norm() - 1.0).abs() < 1e-12);
        assert!(nmse(&est, y.values()) < 0.5);
    }

    #[test]
    fn bad_sparsity_rejected() {
        let (p, _) = problem(10, 5, 1, 1, DitherLaw::UniformDynamicRange, 7);
        assert!(CsProblem::new(p.measurements().clone(), 0).is_err());
        assert!(CsProblem::new(p.measurements().clone(), 6).is_err());
    }
}
