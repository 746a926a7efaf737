use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{build_polyhedron, orka_solve, SolverKind};
use crate::error::{OrkaError, Result};
use crate::feasibility::SolverConfig;
use crate::rng::derive_seed;
use crate::sensing::{
    quantize_vector, quantize_with_thresholds, DitherConfig, NoiseConfig, OneBitMeasurements, SamplingModel,
};

/// Source of fresh one-bit data for caller-chosen thresholds.
pub trait MeasurementOracle: Sync {
    fn model(&self) -> &Arc<SamplingModel>;
    /// Initial acquisition with dithered thresholds.
    fn acquire(&self, dither: &DitherConfig, seed: u64) -> Result<OneBitMeasurements>;
    /// Re-measure against `thresholds` (row-major `n × m`) in round `round`.
    fn measure(&self, thresholds: Vec<f64>, m: usize, round: usize) -> Result<OneBitMeasurements>;
}

/// Oracle backed by a known signal and a noise law.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    pub model: Arc<SamplingModel>,
    pub signal: DVector<f64>,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl MeasurementOracle for SimulatedOracle {
    fn model(&self) -> &Arc<SamplingModel> {
        &self.model
    }

    fn acquire(&self, dither: &DitherConfig, seed: u64) -> Result<OneBitMeasurements> {
        quantize_vector(&self.model, self.signal.as_slice(), dither, &self.noise, seed)
    }

    fn measure(&self, thresholds: Vec<f64>, m: usize, round: usize) -> Result<OneBitMeasurements> {
        let seed = derive_seed(self.seed, round as u64 + 1);
        quantize_with_thresholds(&self.model, self.signal.as_slice(), m, thresholds, &self.noise, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    /// Outer rounds K.
    pub rounds: usize,
    pub solver: SolverKind,
    /// Inner solver settings; `inner.max_iters` is the per-round budget.
    pub inner: SolverConfig,
    /// Stop once `Σ_ℓ ‖τ_{k+1}^(ℓ) − τ_k^(ℓ)‖₂ ≤ δ`; `None` means `1e−3·m·√n`.
    pub delta: Option<f64>,
    /// Re-measure with the new thresholds every round instead of keeping
    /// the original signs.
    pub requantize: bool,
    /// Start each round from the previous estimate instead of `x0`.
    pub warm_start: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            rounds: 5,
            solver: SolverKind::BlockSkm,
            inner: SolverConfig::default(),
            delta: None,
            requantize: false,
            warm_start: false,
        }
    }
}

impl AdaptiveConfig {
    /// Per-round budget of `10·d` inner iterations.
    pub fn with_default_budget(mut self, d: usize) -> Self {
        self.inner.max_iters = 10 * d;
        self
    }

    fn delta_for(&self, n: usize, m: usize) -> f64 {
        self.delta.unwrap_or(1e-3 * m as f64 * (n as f64).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `Σ_ℓ ‖τ_{k+1}^(ℓ) − τ_k^(ℓ)‖₂` after this round.
    pub threshold_shift: f64,
    pub inner_iterations: usize,
    pub dist_sq: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub estimate: DVector<f64>,
    pub rounds: Vec<RoundRecord>,
    /// Thresholds the last estimate was computed with.
    pub final_measurements: OneBitMeasurements,
    /// Set when an inner solve failed and the previous estimate was kept.
    pub aborted: Option<OrkaError>,
}

/// `τ_{k+1} = A x_k − ½ r ⊙ ε_k` with `ε_k = r ⊙ (A x_k − τ_k)`.
pub fn next_thresholds(meas: &OneBitMeasurements, ax: &[f64]) -> Vec<f64> {
    let (n, m) = (meas.n(), meas.m());
    let mut out = Vec::with_capacity(n * m);
    for (j, &y) in ax.iter().enumerate().take(n) {
        for l in 0..m {
            let r = meas.sign(j, l) as f64;
            let eps = r * (y - meas.threshold(j, l));
            out.push(y - 0.5 * r * eps);
        }
    }
    out
}

/// Adaptive thresholding starting from an existing acquisition.
///
/// `oracle` is only consulted when `cfg.requantize` is set.
pub fn adaptive_from_measurements(
    initial: &OneBitMeasurements,
    oracle: Option<&dyn MeasurementOracle>,
    cfg: &AdaptiveConfig,
    x0: &DVector<f64>,
) -> Result<AdaptiveOutcome> {
    if cfg.rounds == 0 {
        return Err(OrkaError::InvalidArgument("need at least one round".into()));
    }
    let delta = cfg.delta_for(initial.n(), initial.m());
    if !(delta > 0.0) {
        return Err(OrkaError::InvalidArgument("delta must be > 0".into()));
    }
    if cfg.requantize && oracle.is_none() {
        return Err(OrkaError::InvalidArgument("re-quantization needs a measurement oracle".into()));
    }
    let mut meas = initial.clone();
    let mut estimate: Option<DVector<f64>> = None;
    let mut used = meas.clone();
    let mut rounds = Vec::new();
    let mut aborted = None;
    for k in 0..cfg.rounds {
        let poly = build_polyhedron(&meas);
        let mut inner = cfg.inner.clone();
        if k > 0 {
            inner.seed = derive_seed(cfg.inner.seed, k as u64);
        }
        let start = match (&estimate, cfg.warm_start) {
            (Some(x), true) => x.clone(),
            _ => x0.clone(),
        };
        let (x, trace) = match orka_solve(&poly, cfg.solver, &inner, &start) {
            Ok(out) => out,
            Err(e) => {
                aborted = Some(e);
                break;
            }
        };
        let ax = meas.model().apply(x.as_slice());
        let next = next_thresholds(&meas, ax.as_slice());
        let (n, m) = (meas.n(), meas.m());
        let mut shift = 0.0;
        for l in 0..m {
            let s: f64 = (0..n).map(|j| (next[j * m + l] - meas.threshold(j, l)).powi(2)).sum();
            shift += s.sqrt();
        }
        rounds.push(RoundRecord {
            round: k,
            threshold_shift: shift,
            inner_iterations: trace.iterations,
            dist_sq: trace.entries.last().and_then(|e| e.dist_sq),
        });
        used = meas.clone();
        estimate = Some(x);
        if shift <= delta || k + 1 == cfg.rounds {
            break;
        }
        meas = match (cfg.requantize, oracle) {
            (true, Some(o)) => o.measure(next, m, k + 1)?,
            _ => meas.with_thresholds(next)?,
        };
    }
    let estimate = match (estimate, &aborted) {
        (Some(x), _) => x,
        (None, Some(e)) => return Err(e.clone()),
        (None, None) => unreachable!("at least one round runs"),
    };
    Ok(AdaptiveOutcome { estimate, rounds, final_measurements: used, aborted })
}

/// Acquires one-bit data through `oracle` and refines the thresholds
/// round by round.
pub fn adaptive_threshold_solve(
    oracle: &dyn MeasurementOracle,
    cfg: &AdaptiveConfig,
    dither: &DitherConfig,
    dither_seed: u64,
) -> Result<AdaptiveOutcome> {
    let initial = oracle.acquire(dither, dither_seed)?;
    let x0 = DVector::zeros(oracle.model().cols());
    adaptive_from_measurements(&initial, Some(oracle), cfg, &x0)
}
