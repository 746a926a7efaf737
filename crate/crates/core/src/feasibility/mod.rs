//! Kaczmarz-type solvers for linear inequality systems `C x ⪰ b`.
//!
//! Every solver works against a [`RowProvider`], so the one-bit polyhedron
//! can be solved without materializing its rows.

mod block;
mod kaczmarz;
mod precondition;

pub use block::block_skm_solve;
pub(crate) use block::{block_rows, shrink_solve};
pub use kaczmarz::{noisy_rka_error_bound, quantile_rka_solve, quantile_threshold, rka_solve, skm_solve};
pub use precondition::{
    preconditioned_skm, prskm_solve, qr_precondition, sketch_precondition, sketch_prskm_solve, QrFactors,
    SketchPreconditioner,
};

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};
use crate::linalg::{axpy, dist_sq, dot, norm_sq};
use crate::rng::Rng;

/// Contiguous equal-size blocks: block `k` holds rows `k·len .. (k+1)·len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub blocks: usize,
    pub block_len: usize,
}

/// Read-only access to the rows of `C x ⪰ b`.
///
/// Implementations must be safe for concurrent reads.
pub trait RowProvider: Sync {
    fn row_count(&self) -> usize;
    fn dim(&self) -> usize;
    /// `⟨c_j, x⟩`.
    fn row_dot(&self, j: usize, x: &[f64]) -> f64;
    /// `y += alpha·c_j`.
    fn row_axpy(&self, j: usize, alpha: f64, y: &mut [f64]);
    fn rhs(&self, j: usize) -> f64;
    /// Must equal `‖c_j‖²` of the vector returned by [`RowProvider::row`].
    fn row_norm_sq(&self, j: usize) -> f64;

    fn is_equality(&self, _j: usize) -> bool {
        false
    }

    fn frob_norm_sq(&self) -> f64 {
        (0..self.row_count()).map(|j| self.row_norm_sq(j)).sum()
    }

    fn row(&self, j: usize) -> (DVector<f64>, f64) {
        let mut c = DVector::zeros(self.dim());
        self.row_axpy(j, 1.0, c.as_mut_slice());
        (c, self.rhs(j))
    }

    fn block_layout(&self) -> Option<BlockLayout> {
        None
    }

    /// Rows and right-hand side of block `k`.
    fn block(&self, k: usize) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let layout = self.block_layout()?;
        if k >= layout.blocks {
            return None;
        }
        let start = k * layout.block_len;
        let mut m = DMatrix::zeros(layout.block_len, self.dim());
        let mut b = DVector::zeros(layout.block_len);
        for i in 0..layout.block_len {
            let (c, rhs) = self.row(start + i);
            m.set_row(i, &c.transpose());
            b[i] = rhs;
        }
        Some((m, b))
    }

    /// Dense copy of the system (rows, right-hand side, row kinds, blocks).
    fn materialize(&self) -> DenseSystem {
        let (m, d) = (self.row_count(), self.dim());
        let mut data = vec![0.0; m * d];
        for j in 0..m {
            self.row_axpy(j, 1.0, &mut data[j * d..(j + 1) * d]);
        }
        let rhs = (0..m).map(|j| self.rhs(j)).collect();
        let equality = (0..m).map(|j| self.is_equality(j)).collect();
        DenseSystem::from_parts(m, d, data, rhs, equality, self.block_layout())
    }
}

/// Residual that the row wants removed: `(b_j − ⟨c_j,x⟩)⁺` for inequality
/// rows, the signed residual for equality rows.
#[inline]
pub fn row_violation<P: RowProvider + ?Sized>(p: &P, j: usize, x: &[f64]) -> f64 {
    let r = p.rhs(j) - p.row_dot(j, x);
    if p.is_equality(j) {
        r
    } else {
        r.max(0.0)
    }
}

/// `‖(b − Cx)⁺‖∞`, with `|b_j − ⟨c_j,x⟩|` for equality rows.
pub fn max_violation<P: RowProvider + ?Sized>(p: &P, x: &[f64]) -> f64 {
    (0..p.row_count()).map(|j| row_violation(p, j, x).abs()).fold(0.0, f64::max)
}

/// Row-major dense system.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSystem {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
    norms: Vec<f64>,
    equality: Vec<bool>,
    blocks: Option<BlockLayout>,
}

impl DenseSystem {
    fn from_parts(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        rhs: Vec<f64>,
        equality: Vec<bool>,
        blocks: Option<BlockLayout>,
    ) -> Self {
        let norms = data.chunks_exact(cols.max(1)).map(norm_sq).collect();
        DenseSystem { rows, cols, data, rhs, norms, equality, blocks }
    }

    fn build(c: &DMatrix<f64>, b: &DVector<f64>, equality: bool) -> Result<Self> {
        if c.nrows() != b.len() {
            return Err(OrkaError::DimensionMismatch { expected: c.nrows(), got: b.len() });
        }
        if c.nrows() == 0 || c.ncols() == 0 {
            return Err(OrkaError::InvalidArgument("empty system".into()));
        }
        let data = c.transpose().as_slice().to_vec();
        Ok(Self::from_parts(c.nrows(), c.ncols(), data, b.as_slice().to_vec(), vec![equality; c.nrows()], None))
    }

    /// `C x ⪰ b`.
    pub fn inequalities(c: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        Self::build(c, b, false)
    }

    /// `C x = b`.
    pub fn equalities(c: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        Self::build(c, b, true)
    }

    /// Declares contiguous blocks of `block_len` rows.
    pub fn with_blocks(mut self, block_len: usize) -> Result<Self> {
        if block_len == 0 || !self.rows.is_multiple_of(block_len) {
            return Err(OrkaError::InvalidArgument(format!(
                "{} rows do not split into blocks of {block_len}",
                self.rows
            )));
        }
        self.blocks = Some(BlockLayout { blocks: self.rows / block_len, block_len });
        Ok(self)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn rhs_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.rhs)
    }

    pub fn row_slice(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }
}

impl RowProvider for DenseSystem {
    fn row_count(&self) -> usize {
        self.rows
    }
    fn dim(&self) -> usize {
        self.cols
    }
    #[inline]
    fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        dot(self.row_slice(j), x)
    }
    #[inline]
    fn row_axpy(&self, j: usize, alpha: f64, y: &mut [f64]) {
        axpy(alpha, self.row_slice(j), y)
    }
    #[inline]
    fn rhs(&self, j: usize) -> f64 {
        self.rhs[j]
    }
    #[inline]
    fn row_norm_sq(&self, j: usize) -> f64 {
        self.norms[j]
    }
    fn is_equality(&self, j: usize) -> bool {
        self.equality[j]
    }
    fn block_layout(&self) -> Option<BlockLayout> {
        self.blocks
    }
}

/// How Block SKM forms the rows of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BlockSketch {
    /// Use the block rows as they are.
    #[default]
    Identity,
    /// Replace block `B` with `GᵀB`, `G` an `n × n` standard Gaussian matrix
    /// drawn fresh every iteration.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖(b − Cx)⁺‖∞ ≤ tol`.
    pub tol: f64,
    /// Constant relaxation λ in (0, 2).
    pub relaxation: f64,
    /// γ for SKM and PrSKM; `None` means `min(50, M)`.
    pub motzkin_sample: Option<usize>,
    /// k′ for Block SKM; `None` means `min(d − 1, n)`.
    pub block_rows: Option<usize>,
    pub block_sketch: BlockSketch,
    /// q for the quantile variant.
    pub quantile: f64,
    /// Sketch size s for the storage-friendly preconditioner; `None` means `4d`.
    pub sketch_size: Option<usize>,
    /// Iterations between full residual scans; `None` picks a scan cadence
    /// that costs about as much as the iterations in between.
    pub check_every: Option<usize>,
    /// Keep one trace entry per iteration.
    pub record_trace: bool,
    /// Ground truth for per-iteration squared distances.
    #[serde(skip)]
    pub reference: Option<DVector<f64>>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            tol: 1e-8,
            relaxation: 1.0,
            motzkin_sample: None,
            block_rows: None,
            block_sketch: BlockSketch::Identity,
            quantile: 0.5,
            sketch_size: None,
            check_every: None,
            record_trace: false,
            reference: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_reference(mut self, x: DVector<f64>) -> Self {
        self.reference = Some(x);
        self.record_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(OrkaError::InvalidArgument(format!("relaxation {} outside (0, 2)", self.relaxation)));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(OrkaError::InvalidArgument(format!("quantile {} outside (0, 1)", self.quantile)));
        }
        if !(self.tol >= 0.0) {
            return Err(OrkaError::InvalidArgument("tol must be >= 0".into()));
        }
        if self.motzkin_sample == Some(0) || self.block_rows == Some(0) || self.check_every == Some(0) {
            return Err(OrkaError::InvalidArgument("sample sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn gamma(&self, rows: usize) -> usize {
        self.motzkin_sample.unwrap_or(50).min(rows).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub row: Option<usize>,
    pub dist_sq: Option<f64>,
    pub max_residual: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
    pub final_max_residual: f64,
    /// Selected rows with zero norm, left untouched.
    pub skipped_rows: usize,
    /// Block iterations whose k′ had to shrink for a singular Gram matrix.
    pub shrunk_blocks: usize,
    /// Early termination without residual progress.
    pub stalled: bool,
    /// Iterations where a sparse projection changed the support.
    pub support_changes: usize,
    pub elapsed: Duration,
}

impl ConvergenceTrace {
    /// Squared distances, one per recorded iteration.
    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().filter_map(|e| e.dist_sq).collect()
    }

    /// Squared distance after `iter` iterations; the last recorded value when
    /// the solver stopped earlier.
    pub fn dist_at(&self, iter: usize) -> Option<f64> {
        let idx = self.entries.partition_point(|e| e.iteration <= iter);
        self.entries[..idx].iter().rev().find_map(|e| e.dist_sq)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,dist_sq,max_residual,row\n");
        let f = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        for e in &self.entries {
            let row = e.row.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", e.iteration, f(e.dist_sq), f(e.max_residual), row);
        }
        out
    }
}

pub(crate) enum RowUpdate {
    Moved,
    Satisfied,
    ZeroRow,
}

/// In-place relaxed projection onto row `j`.
pub(crate) fn project_row<P: RowProvider + ?Sized>(
    p: &P,
    j: usize,
    x: &mut [f64],
    relaxation: f64,
) -> Result<RowUpdate> {
    let nrm = p.row_norm_sq(j);
    if nrm == 0.0 {
        return Ok(RowUpdate::ZeroRow);
    }
    let beta = row_violation(p, j, x);
    if beta == 0.0 {
        return Ok(RowUpdate::Satisfied);
    }
    let coef = relaxation * beta / nrm;
    if !coef.is_finite() {
        return Err(OrkaError::NonFinite { iteration: 0 });
    }
    p.row_axpy(j, coef, x);
    Ok(RowUpdate::Moved)
}

/// One Kaczmarz step on row `j`: `x + β/‖c_j‖²·c_j`.
///
/// A zero-norm row leaves `x` unchanged.
pub fn rka_step<P: RowProvider + ?Sized>(x: &DVector<f64>, j: usize, provider: &P) -> Result<DVector<f64>> {
    if j >= provider.row_count() {
        return Err(OrkaError::InvalidArgument(format!("row {j} out of range")));
    }
    if x.len() != provider.dim() {
        return Err(OrkaError::DimensionMismatch { expected: provider.dim(), got: x.len() });
    }
    let mut out = x.clone();
    project_row(provider, j, out.as_mut_slice(), 1.0)?;
    Ok(out)
}

/// Shared iteration loop: periodic residual scans, tracing, timing and
/// non-finite detection. `step` performs one iteration and returns the
/// selected row.
pub(crate) fn drive<P, F>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    rows_per_iter: usize,
    rng: &mut Rng,
    step: F,
) -> Result<(DVector<f64>, ConvergenceTrace)>
where
    P: RowProvider + ?Sized,
    F: FnMut(&mut [f64], &mut Rng, &mut ConvergenceTrace) -> Result<Option<usize>>,
{
    drive_with(provider, cfg, x0, rows_per_iter, rng, |x| max_violation(provider, x), step)
}

/// [`drive`] with a caller-supplied residual scan, for solvers that keep
/// cached products from which the scan is cheaper.
pub(crate) fn drive_with<P, V, F>(
    provider: &P,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
    rows_per_iter: usize,
    rng: &mut Rng,
    mut violation: V,
    mut step: F,
) -> Result<(DVector<f64>, ConvergenceTrace)>
where
    P: RowProvider + ?Sized,
    V: FnMut(&[f64]) -> f64,
    F: FnMut(&mut [f64], &mut Rng, &mut ConvergenceTrace) -> Result<Option<usize>>,
{
    cfg.validate()?;
    if x0.len() != provider.dim() {
        return Err(OrkaError::DimensionMismatch { expected: provider.dim(), got: x0.len() });
    }
    let start = Instant::now();
    let check_every = cfg.check_every.unwrap_or_else(|| provider.row_count().div_ceil(rows_per_iter.max(1)).max(1));
    let mut x = x0.clone();
    let mut trace = ConvergenceTrace::default();
    let mut viol = violation(x.as_slice());
    if cfg.record_trace {
        trace.entries.push(TraceEntry {
            iteration: 0,
            row: None,
            dist_sq: cfg.reference.as_ref().map(|r| dist_sq(x.as_slice(), r.as_slice())),
            max_residual: Some(viol),
        });
    }
    if viol <= cfg.tol {
        trace.converged = true;
    }
    let mut it = 0;
    while !trace.converged && it < cfg.max_iters {
        let row = step(x.as_mut_slice(), rng, &mut trace).map_err(|e| match e {
            OrkaError::NonFinite { .. } => OrkaError::NonFinite { iteration: it + 1 },
            other => other,
        })?;
        it += 1;
        let scan = it % check_every == 0 || it == cfg.max_iters;
        let mut max_residual = None;
        if scan {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(OrkaError::NonFinite { iteration: it });
            }
            viol = violation(x.as_slice());
            max_residual = Some(viol);
            trace.converged = viol <= cfg.tol;
        }
        if cfg.record_trace {
            trace.entries.push(TraceEntry {
                iteration: it,
                row,
                dist_sq: cfg.reference.as_ref().map(|r| dist_sq(x.as_slice(), r.as_slice())),
                max_residual,
            });
        }
    }
    trace.iterations = it;
    trace.final_max_residual = viol;
    trace.elapsed = start.elapsed();
    Ok((x, trace))
}
