//! The one-bit polyhedron and the ORKA pipeline on top of the feasibility
//! solvers.

mod adaptive;
mod block;

pub use adaptive::{
    adaptive_from_measurements, adaptive_threshold_solve, next_thresholds, AdaptiveConfig, AdaptiveOutcome,
    MeasurementOracle, RoundRecord, SimulatedOracle,
};
pub use block::GRAM_BUDGET;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};
use crate::feasibility::{
    block_skm_solve, preconditioned_skm, qr_precondition, quantile_rka_solve, rka_solve, sketch_prskm_solve, skm_solve,
    BlockLayout, BlockSketch, ConvergenceTrace, DenseSystem, RowProvider, SolverConfig,
};
use crate::linalg::{axpy, dot};
use crate::sensing::OneBitMeasurements;

/// Largest `m·n·d` for which the dense polyhedron matrix may be built.
pub const MATERIALIZE_BUDGET: usize = 10_000_000;

/// `{x : r_j^(ℓ)(⟨a_j, x⟩ − τ_j^(ℓ)) ≥ 0}` with rows generated on demand.
///
/// Row `ℓ·n + j` is `(r_j^(ℓ)·a_j, r_j^(ℓ)·τ_j^(ℓ))`, so block `ℓ` is
/// `(diag(r^(ℓ))A, r^(ℓ) ⊙ τ^(ℓ))`.
#[derive(Clone, Debug)]
pub struct OneBitPolyhedron {
    meas: OneBitMeasurements,
}

pub fn build_polyhedron(measurements: &OneBitMeasurements) -> OneBitPolyhedron {
    OneBitPolyhedron { meas: measurements.clone() }
}

impl OneBitPolyhedron {
    pub fn new(measurements: OneBitMeasurements) -> Self {
        OneBitPolyhedron { meas: measurements }
    }

    pub fn measurements(&self) -> &OneBitMeasurements {
        &self.meas
    }

    /// `(j, ℓ)` of global row `g`.
    #[inline]
    pub fn locate(&self, g: usize) -> (usize, usize) {
        let n = self.meas.n();
        (g % n, g / n)
    }

    #[inline]
    fn sign_of(&self, g: usize) -> (usize, f64) {
        let (j, l) = self.locate(g);
        (j, self.meas.sign(j, l) as f64)
    }

    /// Dense copy, refused above [`MATERIALIZE_BUDGET`] entries.
    pub fn materialize_checked(&self) -> Result<DenseSystem> {
        let size = self.meas.total() * self.meas.d();
        if size > MATERIALIZE_BUDGET {
            return Err(OrkaError::InvalidArgument(format!(
                "polyhedron has {size} entries, above the materialization budget {MATERIALIZE_BUDGET}"
            )));
        }
        Ok(self.materialize())
    }

    /// Whitespace-separated text: a `rows cols` header, then one line per row
    /// holding `c_1 … c_d b`.
    pub fn to_text(&self) -> Result<String> {
        let dense = self.materialize_checked()?;
        let (m, d) = (self.row_count(), self.dim());
        let mut out = format!("{m} {d}\n");
        for g in 0..m {
            for v in dense.row_slice(g) {
                let _ = write!(out, "{v:.16e} ");
            }
            let _ = writeln!(out, "{:.16e}", self.rhs(g));
        }
        Ok(out)
    }
}

impl RowProvider for OneBitPolyhedron {
    fn row_count(&self) -> usize {
        self.meas.total()
    }

    fn dim(&self) -> usize {
        self.meas.d()
    }

    #[inline]
    fn row_dot(&self, g: usize, x: &[f64]) -> f64 {
        let (j, s) = self.sign_of(g);
        s * dot(self.meas.model().row(j), x)
    }

    #[inline]
    fn row_axpy(&self, g: usize, alpha: f64, y: &mut [f64]) {
        let (j, s) = self.sign_of(g);
        axpy(alpha * s, self.meas.model().row(j), y)
    }

    #[inline]
    fn rhs(&self, g: usize) -> f64 {
        let (j, l) = self.locate(g);
        self.meas.sign(j, l) as f64 * self.meas.threshold(j, l)
    }

    #[inline]
    fn row_norm_sq(&self, g: usize) -> f64 {
        self.meas.model().row_norm_sq(self.locate(g).0)
    }

    fn frob_norm_sq(&self) -> f64 {
        self.meas.m() as f64 * self.meas.model().frob_norm_sq()
    }

    fn block_layout(&self) -> Option<BlockLayout> {
        Some(BlockLayout { blocks: self.meas.m(), block_len: self.meas.n() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Rka,
    Skm,
    Prskm,
    SketchPrskm,
    BlockSkm,
    Quantile,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Rka => "rka",
            SolverKind::Skm => "skm",
            SolverKind::Prskm => "prskm",
            SolverKind::SketchPrskm => "sketch_prskm",
            SolverKind::BlockSkm => "block_skm",
            SolverKind::Quantile => "quantile",
        }
    }
}

/// Runs the chosen feasibility solver over the polyhedron.
///
/// PrSKM uses `√m·R_A` with `R_A` from the QR of the sensing matrix: since
/// `PᵀP = m·AᵀA`, this is the R factor of the stacked polyhedron matrix and
/// the `m·n × d` matrix never has to be formed.
pub fn orka_solve(
    poly: &OneBitPolyhedron,
    solver: SolverKind,
    cfg: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    match solver {
        SolverKind::Rka => rka_solve(poly, cfg, x0),
        SolverKind::Skm => skm_solve(poly, cfg, x0),
        SolverKind::Prskm => {
            let f = qr_precondition(&poly.meas.model().to_matrix())?;
            let r = f.r * (poly.meas.m() as f64).sqrt();
            preconditioned_skm(poly, &r, cfg, x0)
        }
        SolverKind::SketchPrskm => sketch_prskm_solve(poly, cfg, x0),
        SolverKind::BlockSkm if cfg.block_sketch == BlockSketch::Identity && poly.meas.n() <= GRAM_BUDGET => {
            block::gram_block_skm(poly, cfg, x0)
        }
        SolverKind::BlockSkm => block_skm_solve(poly, cfg, x0),
        SolverKind::Quantile => quantile_rka_solve(poly, cfg, x0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub violations: usize,
}

/// Counts rows with `r(⟨a, x⟩ − τ) < −tol`.
pub fn consistency_check(poly: &OneBitPolyhedron, x: &[f64], tol: f64) -> ConsistencyReport {
    let violations = (0..poly.row_count()).filter(|&g| poly.row_dot(g, x) - poly.rhs(g) < -tol).count();
    ConsistencyReport { consistent: violations == 0, violations }
}

/// Dense `P = Ω̃A` built directly from signs (test oracle and small exports).
pub fn dense_polyhedron_matrix(meas: &OneBitMeasurements) -> DMatrix<f64> {
    let (n, m, d) = (meas.n(), meas.m(), meas.d());
    let a = meas.model().to_matrix();
    let mut p = DMatrix::zeros(n * m, d);
    for l in 0..m {
        for j in 0..n {
            let row = a.row(j) * meas.sign(j, l) as f64;
            p.set_row(l * n + j, &row);
        }
    }
    p
}
