//! Seeded Monte Carlo comparisons reproducing the figure protocols at desk
//! scale, with per-trial CSV output and median/IQR summaries.

mod run;
mod table;

pub use run::{nmse, run_experiment, run_plan, workers_from_env, ExperimentOutput, WORKERS_ENV};
pub use table::{SummaryRow, SummaryTable, TrialResult, TrialStatus};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};
use crate::orka::SolverKind;
use crate::sensing::{DitherLaw, NoiseConfig, SignalRole};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig1,
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig3a,
        Preset::Fig3b,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = OrkaError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| OrkaError::InvalidArgument(format!("unknown preset {s:?}")))
    }
}

/// Base of the logarithm in the fig3a oversampling grid `log λ ∈ {3,4,5,6}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Two,
    E,
}

/// Optional replacements for preset values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Number of sensing rows (fixed-`n` presets and `custom`).
    pub n: Option<usize>,
    /// Signal dimension for vector presets.
    pub d: Option<usize>,
    pub sparsity: Option<usize>,
    pub rank: Option<usize>,
    /// Side length `n1 = n2` for matrix presets.
    pub side: Option<usize>,
    /// Replacement sweep grid (same units as the preset's sweep variable).
    pub sweep: Option<Vec<f64>>,
    /// Per-point iteration budget.
    pub iterations: Option<usize>,
    /// Adaptive or alternating rounds.
    pub rounds: Option<usize>,
    pub block_rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub trials: usize,
    pub seed: u64,
    /// Gaussian pre-quantization noise; `None` keeps the preset value.
    pub noise_sigma: Option<f64>,
    pub overrides: Overrides,
    /// Solver for the `custom` preset (default RKA).
    pub solver: Option<SolverKind>,
    pub log_base: LogBase,
    /// Re-measure each adaptive round instead of keeping the original signs.
    pub requantize: bool,
    pub output: Option<PathBuf>,
    /// Add a wall-time column; such CSVs are not reproducible byte for byte.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Fig1,
            trials: 100,
            seed: 42,
            noise_sigma: None,
            overrides: Overrides::default(),
            solver: None,
            log_base: LogBase::Two,
            requantize: false,
            output: None,
            timings: false,
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        ExperimentConfig { preset, ..Default::default() }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves the preset and overrides into concrete parameters.
    pub fn plan(&self) -> Result<Plan> {
        if self.trials == 0 {
            return Err(OrkaError::InvalidArgument("trials must be >= 1".into()));
        }
        let plan = presets::build(self)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// One comparison arm. Arms of a trial share the model, signal and
/// measurements (common random numbers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Solver(SolverKind),
    RandomThresholds,
    AdaptiveThresholds,
    SvpOrka,
    Hsvt,
    FactorizedOrka,
    HtOrka,
    StOrka,
    Biht,
    Nbiht,
}

impl Arm {
    pub fn name(&self) -> &'static str {
        match self {
            Arm::Solver(k) => k.name(),
            Arm::RandomThresholds => "random_thresholds",
            Arm::AdaptiveThresholds => "adaptive_thresholds",
            Arm::SvpOrka => "svp_orka",
            Arm::Hsvt => "hsvt",
            Arm::FactorizedOrka => "factorized_orka",
            Arm::HtOrka => "ht_orka",
            Arm::StOrka => "st_orka",
            Arm::Biht => "biht",
            Arm::Nbiht => "nbiht",
        }
    }
}

/// A sweep point with its resolved sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// Value of the sweep variable.
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub signal: SignalRole,
    /// Row-step budget for the Kaczmarz arms (per round for adaptive arms).
    pub iterations: usize,
}

/// Fully resolved experiment parameters; dumped for the preset golden test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub preset: Preset,
    pub trials: usize,
    pub seed: u64,
    pub sweep: String,
    pub points: Vec<Point>,
    pub arms: Vec<Arm>,
    pub dither: DitherLaw,
    pub noise: NoiseConfig,
    /// Ground truth rescaled to `‖x‖₂ = 1`; estimates are normalized too.
    pub unit_norm: bool,
    pub rounds: usize,
    pub block_rows: Option<usize>,
    pub requantize: bool,
    /// Iteration counts at which NMSE is reported (empty: final only).
    pub checkpoints: Vec<usize>,
}

impl Plan {
    fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.arms.is_empty() {
            return Err(OrkaError::InvalidArgument("plan has no points or arms".into()));
        }
        self.noise.validate()?;
        for p in &self.points {
            if p.n == 0 || p.m == 0 || p.iterations == 0 {
                return Err(OrkaError::InvalidArgument(format!("degenerate sweep point {p:?}")));
            }
        }
        if self.rounds == 0 {
            return Err(OrkaError::InvalidArgument("rounds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows reported per (arm, point, trial).
    pub(crate) fn reports_per_solve(&self) -> usize {
        self.checkpoints.len().max(1)
    }
}

mod presets {
    use super::*;

    /// Logarithmic checkpoints 1, 2, 5, 10, … up to and including `last`.
    pub(super) fn log_checkpoints(last: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut decade = 1usize;
        'outer: loop {
            for f in [1, 2, 5] {
                let c = f * decade;
                if c >= last {
                    break 'outer;
                }
                out.push(c);
            }
            decade *= 10;
        }
        out.push(last);
        out
    }

    fn sweep_or(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
        cfg.overrides.sweep.clone().unwrap_or_else(|| default.to_vec())
    }

    fn noise(cfg: &ExperimentConfig, default: f64) -> NoiseConfig {
        match cfg.noise_sigma.unwrap_or(default) {
            s if s > 0.0 => NoiseConfig::Gaussian { sigma: s },
            _ => NoiseConfig::None,
        }
    }

    fn count(v: f64, what: &str) -> Result<usize> {
        if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0) {
            return Err(OrkaError::InvalidArgument(format!("{what} sweep value {v} is not a positive integer")));
        }
        Ok(v as usize)
    }

    pub(super) fn build(cfg: &ExperimentConfig) -> Result<Plan> {
        let o = &cfg.overrides;
        let base = |sweep: &str, points, arms, dither, noise, unit_norm| Plan {
            preset: cfg.preset,
            trials: cfg.trials,
            seed: cfg.seed,
            sweep: sweep.to_string(),
            points,
            arms,
            dither,
            noise,
            unit_norm,
            rounds: 1,
            block_rows: o.block_rows,
            requantize: cfg.requantize,
            checkpoints: Vec::new(),
        };
        let iters = |default: usize| o.iterations.unwrap_or(default);
        Ok(match cfg.preset {
            Preset::Fig1 => {
                let (n, d) = (o.n.unwrap_or(100), o.d.unwrap_or(10));
                let budget = iters(10_000);
                let point = Point { value: 40.0, n, m: 40, signal: SignalRole::Dense { d }, iterations: budget };
                let arms = [SolverKind::Rka, SolverKind::Skm, SolverKind::Prskm, SolverKind::BlockSkm]
                    .map(Arm::Solver)
                    .to_vec();
                let mut plan = base("m", vec![point], arms, DitherLaw::Gaussian { sigma: 1.0 }, noise(cfg, 0.0), false);
                plan.checkpoints = log_checkpoints(budget);
                plan.block_rows = Some(o.block_rows.unwrap_or((d / 2).max(1)));
                plan
            }
            Preset::Fig2a | Preset::Fig2b => {
                let matrix = cfg.preset == Preset::Fig2a;
                let signal = if matrix {
                    let side = o.side.unwrap_or(30);
                    SignalRole::LowRank { n1: side, n2: side, r: o.rank.unwrap_or(2) }
                } else {
                    SignalRole::Sparse { d: o.d.unwrap_or(100), s: o.sparsity.unwrap_or(10) }
                };
                let n = o.n.unwrap_or(if matrix { 1800 } else { 500 });
                let budget = iters(if matrix { 1000 } else { 200 });
                let points = sweep_or(cfg, &[1.0, 10.0, 20.0, 30.0])
                    .into_iter()
                    .map(|v| Ok(Point { value: v, n, m: count(v, "m")?, signal, iterations: budget }))
                    .collect::<Result<Vec<_>>>()?;
                let arms = vec![Arm::RandomThresholds, Arm::AdaptiveThresholds];
                let mut plan = base("m", points, arms, DitherLaw::UniformDynamicRange, noise(cfg, 0.1), false);
                plan.rounds = o.rounds.unwrap_or(5);
                plan.block_rows = Some(o.block_rows.unwrap_or(if matrix { 40 } else { 50 }));
                plan
            }
            Preset::Fig3a => {
                let side = o.side.unwrap_or(30);
                let r = o.rank.unwrap_or(2);
                let signal = SignalRole::LowRank { n1: side, n2: side, r };
                let base_val = match cfg.log_base {
                    LogBase::Two => 2f64,
                    LogBase::E => std::f64::consts::E,
                };
                let grid: Vec<f64> = [3.0, 4.0, 5.0, 6.0].iter().map(|e| base_val.powf(*e)).collect();
                let points = sweep_or(cfg, &grid)
                    .into_iter()
                    .map(|lambda| {
                        let n = (lambda * (side * r) as f64).round() as usize;
                        Point { value: lambda, n, m: 1, signal, iterations: iters(5 * n) }
                    })
                    .collect();
                base(
                    "oversampling",
                    points,
                    vec![Arm::SvpOrka, Arm::Hsvt],
                    DitherLaw::UniformDynamicRange,
                    noise(cfg, 0.0),
                    false,
                )
            }
            Preset::Fig3b => {
                let side = o.side.unwrap_or(30);
                let r = o.rank.unwrap_or(1);
                let signal = SignalRole::LowRank { n1: side, n2: side, r };
                let points = sweep_or(cfg, &[5.0, 10.0, 15.0, 20.0])
                    .into_iter()
                    .map(|beta| {
                        let n = (beta * (side * side * r) as f64).round() as usize;
                        Point { value: beta, n, m: 1, signal, iterations: iters(n) }
                    })
                    .collect();
                let mut plan = base(
                    "oversampling",
                    points,
                    vec![Arm::FactorizedOrka],
                    DitherLaw::UniformDynamicRange,
                    noise(cfg, 0.1),
                    false,
                );
                plan.rounds = o.rounds.unwrap_or(20);
                plan
            }
            Preset::Fig4a => {
                let (d, s) = (o.d.unwrap_or(100), o.sparsity.unwrap_or(15));
                let dof = s as f64 * (d as f64 / s as f64).ln();
                let points = sweep_or(cfg, &[10.0, 50.0, 100.0, 200.0])
                    .into_iter()
                    .map(|os| {
                        let n = (os * dof).round() as usize;
                        Point { value: os, n, m: 1, signal: SignalRole::Sparse { d, s }, iterations: iters(10 * n) }
                    })
                    .collect();
                let arms = vec![Arm::HtOrka, Arm::StOrka, Arm::Biht];
                base("oversampling", points, arms, DitherLaw::UniformDynamicRange, noise(cfg, 0.1), false)
            }
            Preset::Fig4b => {
                let (d, s) = (o.d.unwrap_or(256), o.sparsity.unwrap_or(25));
                let points = sweep_or(cfg, &[1000.0, 1500.0, 2000.0, 2500.0])
                    .into_iter()
                    .map(|v| {
                        let n = count(v, "n")?;
                        Ok(Point { value: v, n, m: 1, signal: SignalRole::Sparse { d, s }, iterations: iters(10 * n) })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let arms = vec![Arm::HtOrka, Arm::StOrka, Arm::Nbiht];
                base("n", points, arms, DitherLaw::Zero, noise(cfg, 0.1), true)
            }
            Preset::Custom => {
                let (n, d) = (o.n.unwrap_or(200), o.d.unwrap_or(10));
                let points = sweep_or(cfg, &[4.0])
                    .into_iter()
                    .map(|v| {
                        Ok(Point {
                            value: v,
                            n,
                            m: count(v, "m")?,
                            signal: SignalRole::Dense { d },
                            iterations: iters(20 * n),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let arm = Arm::Solver(cfg.solver.unwrap_or(SolverKind::Rka));
                base("m", points, vec![arm], DitherLaw::UniformDynamicRange, noise(cfg, 0.0), false)
            }
        })
    }
}
