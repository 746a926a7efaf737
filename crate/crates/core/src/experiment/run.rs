use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::table::{results_to_csv, sort_results};
use super::{Arm, ExperimentConfig, Plan, SummaryTable, TrialResult, TrialStatus};
use crate::error::{OrkaError, Result};
use crate::feasibility::SolverConfig;
use crate::linalg::{dist_sq, norm_sq};
use crate::orka::{
    adaptive_from_measurements, build_polyhedron, orka_solve, AdaptiveConfig, SimulatedOracle, SolverKind,
};
use crate::rng::derive_seed;
use crate::sensing::{
    gen_gaussian_model, gen_signal, quantize, DitherConfig, OneBitMeasurements, SamplingModel, SignalRole,
    StructuredSignal,
};
use crate::structured::{
    biht_baseline, factorized_orka_solve, hsvt_baseline, ht_orka_solve, st_orka_solve, svp_orka_solve, BihtConfig,
    CsConfig, CsProblem, FactorizedConfig, HsvtConfig, MatrixSensingProblem,
};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "ORKA_WORKERS";

/// Largest tolerated fraction of aborted trials.
const MAX_ABORT_FRACTION: f64 = 0.1;

pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(OrkaError::InvalidArgument(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// `‖x̄ − x‖²/‖x‖²` (Frobenius for matrices stored as vectors).
pub fn nmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(OrkaError::DimensionMismatch { expected: truth.len(), got: estimate.len() });
    }
    let t = norm_sq(truth);
    if t == 0.0 {
        return Err(OrkaError::InvalidArgument("ground truth is zero".into()));
    }
    Ok(dist_sq(estimate, truth) / t)
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub plan: Plan,
    /// Sorted by arm, point, sweep value and trial.
    pub results: Vec<TrialResult>,
    pub summary: SummaryTable,
}

impl ExperimentOutput {
    pub fn aborted(&self) -> usize {
        self.results.iter().filter(|r| r.is_aborted()).count()
    }

    pub fn to_csv(&self, timings: bool) -> String {
        results_to_csv(self.plan.preset.name(), &self.results, timings)
    }

    /// Fails when more than 10% of the reported trials aborted.
    pub fn check_aborts(&self) -> Result<()> {
        let (aborted, total) = (self.aborted(), self.results.len());
        if aborted as f64 > MAX_ABORT_FRACTION * total as f64 {
            return Err(OrkaError::TooManyAborts { aborted, total });
        }
        Ok(())
    }
}

/// Runs the configured experiment, writes the CSV (if an output path is
/// set) and fails when too many trials aborted.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    let plan = cfg.plan()?;
    let out = run_plan(&plan, workers)?;
    if let Some(path) = &cfg.output {
        std::fs::write(path, out.to_csv(cfg.timings))?;
    }
    out.check_aborts()?;
    Ok(out)
}

/// Runs every trial (all sweep points of one trial form a job), in parallel
/// unless `workers == Some(1)`.
pub fn run_plan(plan: &Plan, workers: Option<usize>) -> Result<ExperimentOutput> {
    let mut results: Vec<TrialResult> = match workers {
        Some(1) => (0..plan.trials).flat_map(|t| run_trial(plan, t)).collect(),
        _ => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()
                .map_err(|e| OrkaError::InvalidArgument(format!("worker pool: {e}")))?;
            pool.install(|| (0..plan.trials).into_par_iter().flat_map_iter(|t| run_trial(plan, t)).collect())
        }
    };
    sort_results(&mut results);
    let summary = SummaryTable::from_results(&results);
    Ok(ExperimentOutput { plan: plan.clone(), results, summary })
}

struct Instance {
    signal: StructuredSignal,
    meas: OneBitMeasurements,
}

/// Sensing matrices of one trial keyed by shape. Points of equal shape share
/// the matrix (and its cached Gram matrix); the seed depends on the trial only.
type Models = Vec<((usize, usize), Arc<SamplingModel>)>;

fn instance(plan: &Plan, point: usize, seed: u64, models: &mut Models) -> Result<Instance> {
    let p = &plan.points[point];
    let shape = (p.n, p.signal.dim());
    let model = match models.iter().find(|(k, _)| *k == shape) {
        Some((_, m)) => m.clone(),
        None => {
            let m = Arc::new(gen_gaussian_model(shape.0, shape.1, derive_seed(seed, 1))?);
            models.push((shape, m.clone()));
            m
        }
    };
    let mut signal = gen_signal(p.signal, derive_seed(seed, 2))?;
    if plan.unit_norm {
        signal = signal.normalized()?;
    }
    let meas = quantize(&model, &signal, &DitherConfig::new(plan.dither, p.m), &plan.noise, derive_seed(seed, 3))?;
    Ok(Instance { signal, meas })
}

/// `(sweep value, nmse, iterations)` rows for one arm.
type Reports = Vec<(f64, f64, usize)>;

fn run_trial(plan: &Plan, trial: usize) -> Vec<TrialResult> {
    let mut models = Models::new();
    let mut out = Vec::new();
    for point in 0..plan.points.len() {
        run_point(plan, point, trial, &mut models, &mut out);
    }
    out
}

fn run_point(plan: &Plan, point: usize, trial: usize, models: &mut Models, out: &mut Vec<TrialResult>) {
    let seed = derive_seed(plan.seed, trial as u64);
    let inst = instance(plan, point, seed, models);
    for (arm_index, arm) in plan.arms.iter().enumerate() {
        let start = Instant::now();
        let outcome = inst.as_ref().map_err(Clone::clone).and_then(|inst| run_arm(plan, point, *arm, inst, seed));
        let wall = start.elapsed();
        let row = |value: f64, nmse: f64, iterations: usize, status: TrialStatus| TrialResult {
            arm: arm.name().to_string(),
            arm_index,
            point,
            value,
            trial,
            nmse,
            iterations,
            wall,
            status,
        };
        match outcome {
            Ok(reports) => {
                out.extend(reports.into_iter().map(|(v, e, it)| row(v, e, it, TrialStatus::Ok)));
            }
            Err(e) => {
                let values: Vec<f64> = if plan.checkpoints.is_empty() {
                    vec![plan.points[point].value]
                } else {
                    plan.checkpoints.iter().map(|&c| c as f64).collect()
                };
                debug_assert_eq!(values.len(), plan.reports_per_solve());
                out.extend(values.into_iter().map(|v| row(v, f64::NAN, 0, TrialStatus::Aborted(e.to_string()))));
            }
        }
    }
}

fn score(plan: &Plan, estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if plan.unit_norm {
        let nrm = norm_sq(estimate).sqrt();
        if nrm > 0.0 {
            let unit: Vec<f64> = estimate.iter().map(|v| v / nrm).collect();
            return nmse(&unit, truth);
        }
    }
    nmse(estimate, truth)
}

fn run_arm(plan: &Plan, point: usize, arm: Arm, inst: &Instance, seed: u64) -> Result<Reports> {
    let p = &plan.points[point];
    let truth = inst.signal.values().as_slice();
    let d = truth.len();
    let solver_seed = derive_seed(seed, 4);
    let base =
        SolverConfig { max_iters: p.iterations, block_rows: plan.block_rows, seed: solver_seed, ..Default::default() };
    let single =
        |est: &[f64], iters: usize| -> Result<Reports> { Ok(vec![(p.value, score(plan, est, truth)?, iters)]) };
    // full-pass baselines get the same number of row visits as the Kaczmarz arms
    let passes = (p.iterations / p.n).max(1);
    match arm {
        Arm::Solver(kind) => {
            let poly = build_polyhedron(&inst.meas);
            let mut cfg = base;
            if !plan.checkpoints.is_empty() {
                cfg = cfg.with_reference(inst.signal.values().clone());
            }
            let (x, trace) = orka_solve(&poly, kind, &cfg, &DVector::zeros(d))?;
            if plan.checkpoints.is_empty() {
                return single(x.as_slice(), trace.iterations);
            }
            let scale = norm_sq(truth);
            plan.checkpoints
                .iter()
                .map(|&c| {
                    let dist = trace.dist_at(c).ok_or_else(|| OrkaError::InvalidArgument("empty trace".into()))?;
                    Ok((c as f64, dist / scale, c.min(trace.iterations)))
                })
                .collect()
        }
        Arm::RandomThresholds => {
            let poly = build_polyhedron(&inst.meas);
            let cfg = SolverConfig { max_iters: p.iterations * plan.rounds, ..base };
            let (x, trace) = orka_solve(&poly, SolverKind::BlockSkm, &cfg, &DVector::zeros(d))?;
            single(x.as_slice(), trace.iterations)
        }
        Arm::AdaptiveThresholds => {
            let cfg = AdaptiveConfig {
                rounds: plan.rounds,
                solver: SolverKind::BlockSkm,
                inner: base,
                requantize: plan.requantize,
                ..Default::default()
            };
            let oracle = SimulatedOracle {
                model: inst.meas.model_arc().clone(),
                signal: inst.signal.values().clone(),
                noise: plan.noise,
                seed: derive_seed(seed, 5),
            };
            let out = adaptive_from_measurements(&inst.meas, Some(&oracle), &cfg, &DVector::zeros(d))?;
            if let Some(e) = out.aborted {
                return Err(e);
            }
            let iters = out.rounds.iter().map(|r| r.inner_iterations).sum();
            single(out.estimate.as_slice(), iters)
        }
        Arm::SvpOrka | Arm::Hsvt | Arm::FactorizedOrka => {
            let SignalRole::LowRank { n1, n2, r } = p.signal else {
                return Err(OrkaError::InvalidArgument(format!("{} needs a low-rank signal", arm.name())));
            };
            let problem = MatrixSensingProblem::new(inst.meas.clone(), n1, n2, r)?;
            match arm {
                Arm::SvpOrka => {
                    let (x, trace) = svp_orka_solve(&problem, &base)?;
                    single(x.as_slice(), trace.iterations)
                }
                Arm::Hsvt => {
                    let x = hsvt_baseline(&problem, &HsvtConfig { iters: passes, ..Default::default() })?;
                    single(x.as_slice(), passes)
                }
                _ => {
                    let cfg = FactorizedConfig {
                        rounds: plan.rounds,
                        inner_iters: Some(p.iterations),
                        seed: solver_seed,
                        ..Default::default()
                    };
                    let (x, _, trace) = factorized_orka_solve(&problem, &cfg)?;
                    single(x.as_slice(), trace.iterations)
                }
            }
        }
        Arm::HtOrka | Arm::StOrka | Arm::Biht | Arm::Nbiht => {
            let SignalRole::Sparse { s, .. } = p.signal else {
                return Err(OrkaError::InvalidArgument(format!("{} needs a sparse signal", arm.name())));
            };
            let problem = CsProblem::new(inst.meas.clone(), s)?;
            let cfg = CsConfig { solver: base, normalize: plan.unit_norm, ..Default::default() };
            match arm {
                Arm::HtOrka => {
                    let (x, trace) = ht_orka_solve(&problem, &cfg)?;
                    single(x.as_slice(), trace.iterations)
                }
                Arm::StOrka => {
                    let (x, trace) = st_orka_solve(&problem, &cfg)?;
                    single(x.as_slice(), trace.iterations)
                }
                _ => {
                    let normalize = arm == Arm::Nbiht;
                    let x = biht_baseline(&problem, &BihtConfig { iters: passes, step: None, normalize })?;
                    single(x.as_slice(), passes)
                }
            }
        }
    }
}
