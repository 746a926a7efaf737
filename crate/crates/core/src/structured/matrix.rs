use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{svp_project, svt};
use crate::error::{OrkaError, Result};
use crate::feasibility::{
    drive, project_row, rka_solve, ConvergenceTrace, RowProvider, RowUpdate, SolverConfig, TraceEntry,
};
use crate::linalg::{axpy, dist_sq, dot};
use crate::orka::{build_polyhedron, OneBitPolyhedron};
use crate::rng::{self, derive_seed};
use crate::sensing::{OneBitMeasurements, SamplingModel};

/// One-bit matrix sensing: row `j` of the sampling model is `vec(A_j)`
/// (column-major), so `⟨A_j, X⟩ = Tr(A_jᵀX) = vec(A_j)·vec(X)`.
#[derive(Clone, Debug)]
pub struct MatrixSensingProblem {
    poly: OneBitPolyhedron,
    n1: usize,
    n2: usize,
    rank: usize,
}

impl MatrixSensingProblem {
    pub fn new(meas: OneBitMeasurements, n1: usize, n2: usize, rank: usize) -> Result<Self> {
        if meas.d() != n1 * n2 {
            return Err(OrkaError::DimensionMismatch { expected: n1 * n2, got: meas.d() });
        }
        if rank == 0 || rank > n1.min(n2) {
            return Err(OrkaError::InvalidArgument(format!("rank {rank} outside 1..={}", n1.min(n2))));
        }
        Ok(MatrixSensingProblem { poly: build_polyhedron(&meas), n1, n2, rank })
    }

    pub fn measurements(&self) -> &OneBitMeasurements {
        self.poly.measurements()
    }

    pub fn polyhedron(&self) -> &OneBitPolyhedron {
        &self.poly
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sensing_matrix(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n1, self.n2, self.measurements().model().row(j))
    }
}

/// Matrix-form Kaczmarz step on row `g = ℓ·n + j`:
/// `X + (rτ − r·Tr(A_jᵀX))⁺/‖A_j‖_F²·A_j`.
pub fn matrix_rka_step(x: &DMatrix<f64>, g: usize, problem: &MatrixSensingProblem) -> Result<DMatrix<f64>> {
    if x.shape() != problem.shape() {
        return Err(OrkaError::DimensionMismatch { expected: problem.n1 * problem.n2, got: x.len() });
    }
    if g >= problem.poly.row_count() {
        return Err(OrkaError::InvalidArgument(format!("row {g} out of range")));
    }
    let mut out = x.clone();
    project_row(&problem.poly, g, out.as_mut_slice(), 1.0)?;
    Ok(out)
}

fn norm_sampler(p: &OneBitPolyhedron) -> Result<rand_distr::weighted::WeightedAliasIndex<f64>> {
    let w: Vec<f64> = (0..p.row_count()).map(|g| p.row_norm_sq(g)).collect();
    rand_distr::weighted::WeightedAliasIndex::new(w)
        .map_err(|e| OrkaError::InvalidArgument(format!("row weights: {e}")))
}

/// SVP-ORKA with a callback that sees every iterate after projection.
pub fn svp_orka_observe<F: FnMut(usize, &DMatrix<f64>)>(
    problem: &MatrixSensingProblem,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<(DMatrix<f64>, ConvergenceTrace)> {
    let (n1, n2) = problem.shape();
    let sampler = norm_sampler(&problem.poly)?;
    let mut r = rng::seeded(cfg.seed);
    let x0 = DVector::zeros(n1 * n2);
    let mut it = 0usize;
    let (x, trace) = drive(&problem.poly, cfg, &x0, 1, &mut r, |x, r, trace| {
        let g = sampler.sample(r);
        it += 1;
        match project_row(&problem.poly, g, x, cfg.relaxation)? {
            RowUpdate::Moved => {
                let z = DMatrix::from_column_slice(n1, n2, x);
                let p = svp_project(&z, problem.rank)?;
                x.copy_from_slice(p.as_slice());
            }
            RowUpdate::ZeroRow => trace.skipped_rows += 1,
            RowUpdate::Satisfied => {}
        }
        observer(it, &DMatrix::from_column_slice(n1, n2, x));
        Ok(Some(g))
    })?;
    Ok((DMatrix::from_column_slice(n1, n2, x.as_slice()), trace))
}

/// Alternates a Kaczmarz step `Z = KA(X)` with the rank projection
/// `X = P_r(Z)`, starting from `X = 0`.
pub fn svp_orka_solve(problem: &MatrixSensingProblem, cfg: &SolverConfig) -> Result<(DMatrix<f64>, ConvergenceTrace)> {
    svp_orka_observe(problem, cfg, |_, _| {})
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    pub l: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl FactorPair {
    pub fn product(&self) -> DMatrix<f64> {
        &self.l * self.w.transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizedConfig {
    /// Alternation rounds T.
    pub rounds: usize,
    /// Kaczmarz iterations per half-round; `None` means `5·(n1 + n2)·r`.
    pub inner_iters: Option<usize>,
    pub tol: f64,
    /// Consecutive rounds without a lower positive-residual norm before
    /// the alternation is declared stalled.
    pub patience: usize,
    pub seed: u64,
    /// Ground truth `vec(X)` for per-round distances.
    #[serde(skip)]
    pub reference: Option<DVector<f64>>,
    /// Explicit starting factors instead of the random draw.
    #[serde(skip)]
    pub init: Option<FactorPair>,
}

impl Default for FactorizedConfig {
    fn default() -> Self {
        FactorizedConfig { rounds: 20, inner_iters: None, tol: 1e-8, patience: 3, seed: 0, reference: None, init: None }
    }
}

/// Sub-problem with one factor fixed: rows are `vec(A_jᵀL)` (unknown `W`)
/// or `vec(A_j W)` (unknown `L`), with the original signs and thresholds.
fn factor_polyhedron(problem: &MatrixSensingProblem, fixed: &DMatrix<f64>, solve_w: bool) -> Result<OneBitPolyhedron> {
    let meas = problem.measurements();
    let (n1, n2) = problem.shape();
    let r = fixed.ncols();
    let n = meas.n();
    let cols = if solve_w { n2 * r } else { n1 * r };
    let mut data = vec![0.0; n * cols];
    for j in 0..n {
        let a = meas.model().row(j);
        let out = &mut data[j * cols..(j + 1) * cols];
        if solve_w {
            // (A_jᵀL)[b,k] = Σ_a A_j[a,b]·L[a,k]
            for k in 0..r {
                let lk = fixed.column(k);
                for b in 0..n2 {
                    out[b + k * n2] = dot(&a[b * n1..(b + 1) * n1], lk.as_slice());
                }
            }
        } else {
            // (A_j W)[a,k] = Σ_b A_j[a,b]·W[b,k]
            for k in 0..r {
                for b in 0..n2 {
                    let wbk = fixed[(b, k)];
                    if wbk != 0.0 {
                        axpy(wbk, &a[b * n1..(b + 1) * n1], &mut out[k * n1..(k + 1) * n1]);
                    }
                }
            }
        }
    }
    let model = Arc::new(SamplingModel::from_row_major(n, cols, data)?);
    let sub = OneBitMeasurements::new(model, meas.m(), meas.signs().to_vec(), meas.thresholds().to_vec())?;
    Ok(build_polyhedron(&sub))
}

fn positive_residual_norm(poly: &OneBitPolyhedron, x: &[f64]) -> f64 {
    (0..poly.row_count()).map(|g| (poly.rhs(g) - poly.row_dot(g, x)).max(0.0).powi(2)).sum::<f64>().sqrt()
}

/// Alternating minimization over `X = LWᵀ`: with `L` fixed the constraints
/// are linear in `W` and are solved by Kaczmarz, then the roles swap.
///
/// Stops early (flagging `stalled`) after `patience` rounds in a row fail
/// to lower the positive-residual norm; the best round is returned.
pub fn factorized_orka_solve(
    problem: &MatrixSensingProblem,
    cfg: &FactorizedConfig,
) -> Result<(DMatrix<f64>, FactorPair, ConvergenceTrace)> {
    let start = Instant::now();
    let (n1, n2) = problem.shape();
    let r = problem.rank();
    if cfg.rounds == 0 {
        return Err(OrkaError::InvalidArgument("need at least one round".into()));
    }
    let mut pair = match &cfg.init {
        Some(p) => {
            if p.l.shape() != (n1, r) || p.w.shape() != (n2, r) {
                return Err(OrkaError::InvalidArgument("initial factors have the wrong shape".into()));
            }
            p.clone()
        }
        None => {
            let mut g = rng::seeded(derive_seed(cfg.seed, 0xf0));
            let dist = Normal::new(0.0, (1.0 / r as f64).sqrt()).expect("valid normal");
            FactorPair {
                l: DMatrix::from_fn(n1, r, |_, _| dist.sample(&mut g)),
                w: DMatrix::from_fn(n2, r, |_, _| dist.sample(&mut g)),
            }
        }
    };
    let inner =
        SolverConfig { max_iters: cfg.inner_iters.unwrap_or(5 * (n1 + n2) * r), tol: cfg.tol, ..Default::default() };
    let mut trace = ConvergenceTrace::default();
    let entry = |round: usize, pair: &FactorPair, res: f64| TraceEntry {
        iteration: round,
        row: None,
        dist_sq: cfg.reference.as_ref().map(|x| dist_sq(pair.product().as_slice(), x.as_slice())),
        max_residual: Some(res),
    };
    let mut best_res = positive_residual_norm(&problem.poly, pair.product().as_slice());
    let mut best = pair.clone();
    let mut idle = 0;
    trace.entries.push(entry(0, &pair, best_res));
    for t in 0..cfg.rounds {
        let poly_w = factor_polyhedron(problem, &pair.l, true)?;
        let w0 = DVector::from_column_slice(pair.w.as_slice());
        let cfg_w = inner.clone().with_seed(derive_seed(cfg.seed, 2 * t as u64 + 1));
        let (w, tw) = rka_solve(&poly_w, &cfg_w, &w0)?;
        pair.w = DMatrix::from_column_slice(n2, r, w.as_slice());

        let poly_l = factor_polyhedron(problem, &pair.w, false)?;
        let l0 = DVector::from_column_slice(pair.l.as_slice());
        let cfg_l = inner.clone().with_seed(derive_seed(cfg.seed, 2 * t as u64 + 2));
        let (l, tl) = rka_solve(&poly_l, &cfg_l, &l0)?;
        pair.l = DMatrix::from_column_slice(n1, r, l.as_slice());

        trace.iterations += tw.iterations + tl.iterations;
        trace.skipped_rows += tw.skipped_rows + tl.skipped_rows;
        let res = positive_residual_norm(&problem.poly, pair.product().as_slice());
        trace.entries.push(entry(t + 1, &pair, res));
        if res <= cfg.tol {
            best = pair.clone();
            trace.converged = true;
            break;
        }
        if res < best_res {
            best_res = res;
            best = pair.clone();
            idle = 0;
        } else {
            idle += 1;
            if idle >= cfg.patience.max(1) {
                trace.stalled = true;
                break;
            }
        }
    }
    trace.final_max_residual = crate::feasibility::max_violation(&problem.poly, best.product().as_slice());
    trace.elapsed = start.elapsed();
    Ok((best.product(), best, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsvtConfig {
    pub iters: usize,
    /// Gradient step η; `None` means `2·max|τ|`, the step for which the
    /// expected sign-mismatch gradient points exactly at the truth under
    /// uniform dithering.
    pub step: Option<f64>,
    /// Singular-value soft threshold applied before the rank projection.
    pub svt_threshold: f64,
}

impl Default for HsvtConfig {
    fn default() -> Self {
        HsvtConfig { iters: 100, step: None, svt_threshold: 0.0 }
    }
}

/// Sign-mismatch gradient `(1/m′)·Σ_{violated g} c_g` and the mismatch count.
pub(crate) fn mismatch_gradient(poly: &OneBitPolyhedron, x: &[f64]) -> (Vec<f64>, usize) {
    let mut grad = vec![0.0; poly.dim()];
    let mut count = 0;
    for g in 0..poly.row_count() {
        if poly.row_dot(g, x) < poly.rhs(g) {
            poly.row_axpy(g, 1.0, &mut grad);
            count += 1;
        }
    }
    let scale = 1.0 / poly.row_count() as f64;
    grad.iter_mut().for_each(|v| *v *= scale);
    (grad, count)
}

/// Simplified hard singular value thresholding baseline: projected
/// sign-mismatch gradient steps `X ← P_r(svt(X + η·∇))`. Returns the
/// iterate with the fewest sign mismatches.
pub fn hsvt_baseline(problem: &MatrixSensingProblem, cfg: &HsvtConfig) -> Result<DMatrix<f64>> {
    let (n1, n2) = problem.shape();
    let meas = problem.measurements();
    let eta = cfg.step.unwrap_or_else(|| 2.0 * meas.thresholds().iter().fold(0.0f64, |a, t| a.max(t.abs())));
    let mut x = DMatrix::<f64>::zeros(n1, n2);
    let (mut best, mut best_count) = (x.clone(), usize::MAX);
    for _ in 0..=cfg.iters {
        let (grad, count) = mismatch_gradient(&problem.poly, x.as_slice());
        if count < best_count {
            best_count = count;
            best = x.clone();
        }
        if count == 0 {
            break;
        }
        let mut z = x + DMatrix::from_column_slice(n1, n2, &grad) * eta;
        if cfg.svt_threshold > 0.0 {
            z = svt(&z, cfg.svt_threshold)?;
        }
        x = svp_project(&z, problem.rank())?;
    }
    Ok(best)
}
