//! One-bit signal recovery by randomized Kaczmarz over the polyhedron of
//! sign-consistent signals.
//!
//! [`sensing`] draws sampling models, signals and one-bit measurements;
//! [`feasibility`] holds the Kaczmarz-family solvers for linear
//! inequality systems; [`orka`] ties the two together, including adaptive
//! thresholds; [`structured`] adds low-rank and sparse projections;
//! [`analysis`] evaluates the finite-volume quantities; [`experiment`] runs
//! seeded Monte Carlo comparisons.

// `!(x >= y)` comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod feasibility;
pub mod linalg;
pub mod orka;
pub mod rng;
pub mod sensing;
pub mod structured;

pub use error::{OrkaError, Result};
pub use feasibility::{ConvergenceTrace, RowProvider, SolverConfig, TraceEntry};
pub use orka::{build_polyhedron, orka_solve, OneBitPolyhedron, SolverKind};
pub use sensing::{OneBitMeasurements, SamplingModel, StructuredSignal};
