//! Empirical checks of the finite-volume theory: distance averages,
//! recovery radii, sample-complexity shapes and condition-number identities.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};
use crate::linalg::singular_values;
use crate::rng;
use crate::sensing::{
    dynamic_range, gen_dct_model, gen_gaussian_model, gen_signal, quantize_vector, DitherConfig, DitherLaw,
    NoiseConfig, OneBitMeasurements, SamplingModel, SignalRole,
};

/// Relative floor below which `σ_min` counts as zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// `(1/mn)·Σ_{ℓ,j} |⟨a_j, x⟩ − τ_j^(ℓ)|` with thresholds stored row-major
/// (`j·m + ℓ`), `m = thresholds.len()/n`.
pub fn t_ave(model: &SamplingModel, x: &[f64], thresholds: &[f64]) -> Result<f64> {
    let n = model.rows();
    if x.len() != model.cols() {
        return Err(OrkaError::DimensionMismatch { expected: model.cols(), got: x.len() });
    }
    if n == 0 || thresholds.is_empty() || !thresholds.len().is_multiple_of(n) {
        return Err(OrkaError::InvalidArgument(format!(
            "{} thresholds do not split into sequences of {n}",
            thresholds.len()
        )));
    }
    let m = thresholds.len() / n;
    let y = model.apply(x);
    let total: f64 =
        thresholds.chunks(m).zip(y.iter()).map(|(taus, &yj)| taus.iter().map(|t| (yj - t).abs()).sum::<f64>()).sum();
    Ok(total / thresholds.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FvpKind {
    Subgaussian,
    Dct,
    /// One of `n` rows violates the dynamic-range guarantee; `mu_prime` is
    /// the mean distance contributed by that row.
    NoDr {
        n: usize,
        mu_prime: f64,
    },
}

/// Theoretical mean of `T_ave` under uniform dithering on `[−λ, λ]`.
pub fn fvp_mean(kind: FvpKind, lambda: f64, x_norm: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(OrkaError::InvalidArgument(format!("lambda {lambda} must be positive")));
    }
    let x2 = x_norm * x_norm;
    Ok(match kind {
        FvpKind::Subgaussian => lambda / 2.0 + x2 / (2.0 * lambda),
        FvpKind::Dct => lambda / 2.0 + x2 / (4.0 * lambda),
        FvpKind::NoDr { n, mu_prime } => {
            if n == 0 {
                return Err(OrkaError::InvalidArgument("n must be positive".into()));
            }
            let nf = n as f64;
            (nf - 1.0) / nf * (lambda / 2.0 + x2 / (2.0 * lambda)) + mu_prime / nf
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Arbitrary { gamma: f64 },
    LowRank { n1: usize, n2: usize, r: usize },
    Sparse { s: usize, d: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBudget {
    pub set: SetKind,
    pub eps: f64,
    pub rho: f64,
}

impl ComplexityBudget {
    /// The sparse expression vanishes when `s = d`; such budgets carry no
    /// information.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.set, SetKind::Sparse { s, d } if s == d)
    }
}

/// Unscaled sample-complexity expression (absolute constants dropped).
pub fn sample_complexity(budget: &ComplexityBudget) -> Result<f64> {
    let ComplexityBudget { set, eps, rho } = *budget;
    if !(eps > 0.0) || !(rho > 0.0) {
        return Err(OrkaError::InvalidArgument("eps and rho must be positive".into()));
    }
    let log_rho = (1.0 + 1.0 / rho).ln();
    Ok(match set {
        SetKind::Arbitrary { gamma } => {
            if !(gamma > 0.0) {
                return Err(OrkaError::InvalidArgument("gamma must be positive".into()));
            }
            gamma * gamma / (rho * rho * eps * eps)
        }
        SetKind::LowRank { n1, n2, r } => {
            if n1 == 0 || n2 == 0 || r == 0 || r > n1.min(n2) {
                return Err(OrkaError::InvalidArgument("invalid low-rank shape".into()));
            }
            (r * (n1 + n2)) as f64 * log_rho / (eps * eps)
        }
        SetKind::Sparse { s, d } => {
            if s == 0 || s > d {
                return Err(OrkaError::InvalidArgument("need 1 <= s <= d".into()));
            }
            s as f64 * (d as f64 / s as f64).ln() * log_rho / (eps * eps)
        }
    })
}

/// Closed-form Gaussian-complexity surrogates for the unit-norm structured
/// sets: `√(r(n1+n2))` for rank-`r` matrices and `√(s·log(2d/s))` for
/// `s`-sparse vectors. `Arbitrary` returns its stored estimate.
pub fn gaussian_complexity_surrogate(set: SetKind) -> f64 {
    match set {
        SetKind::Arbitrary { gamma } => gamma,
        SetKind::LowRank { n1, n2, r } => ((r * (n1 + n2)) as f64).sqrt(),
        SetKind::Sparse { s, d } => (s as f64 * (2.0 * d as f64 / s as f64).ln()).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusKind {
    Consistent,
    /// Estimate agrees with the measurements except for a fraction `d_h`.
    Hamming {
        d_h: f64,
    },
    NoDr {
        n: usize,
    },
    /// `l` of `n` rows break the dynamic-range guarantee.
    NoDrL {
        n: usize,
        l: usize,
    },
}

/// Upper bound on `‖x̄ − x‖₂` for a (nearly) consistent estimate.
pub fn recovery_radius(kind: RadiusKind, eps: f64, lambda: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) || !(lambda > 0.0) {
        return Err(OrkaError::InvalidArgument(format!("need eps >= 0 and lambda > 0, got {eps}, {lambda}")));
    }
    let base = eps * lambda;
    Ok(match kind {
        RadiusKind::Consistent => 4.0 * base.sqrt(),
        RadiusKind::Hamming { d_h } => {
            if !(0.0..=1.0).contains(&d_h) {
                return Err(OrkaError::InvalidArgument(format!("Hamming distance {d_h} outside [0, 1]")));
            }
            4.0 * base.sqrt() + 2.0 * ((1.0 + lambda * lambda) * d_h).sqrt()
        }
        RadiusKind::NoDr { n } => no_dr_radius(base, n, 1)?,
        RadiusKind::NoDrL { n, l } => no_dr_radius(base, n, l)?,
    })
}

fn no_dr_radius(base: f64, n: usize, l: usize) -> Result<f64> {
    if l >= n {
        return Err(OrkaError::InvalidArgument(format!("L = {l} must be below n = {n}")));
    }
    Ok(4.0 * (base * n as f64 / (n - l) as f64).sqrt())
}

/// Fraction of positions where the two sign vectors disagree.
pub fn hamming_distance(r1: &[i8], r2: &[i8]) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(OrkaError::DimensionMismatch { expected: r1.len(), got: r2.len() });
    }
    if r1.is_empty() {
        return Ok(0.0);
    }
    let diff = r1.iter().zip(r2).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / r1.len() as f64)
}

/// `κ(C) = ‖C‖_F/σ_min(C)`.
pub fn scaled_condition_number(c: &DMatrix<f64>) -> Result<f64> {
    if c.nrows() < c.ncols() || c.ncols() == 0 {
        return Err(OrkaError::InvalidArgument(format!(
            "{}x{} matrix cannot have full column rank",
            c.nrows(),
            c.ncols()
        )));
    }
    let s = singular_values(c)?;
    let min = s[s.len() - 1];
    if min <= SIGMA_FLOOR * s[0] {
        return Err(OrkaError::RankDeficient { sigma_min: min });
    }
    Ok(c.norm() / min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa_a: f64,
    pub kappa_p: f64,
    /// `|κ(P) − κ(A)|/κ(A)`.
    pub kappa_rel_err: f64,
    /// `‖PᵀP − m·AᵀA‖/‖AᵀA‖` (Frobenius).
    pub gram_rel_err: f64,
    /// `|‖P‖_F² − m‖A‖_F²|/(m‖A‖_F²)`.
    pub frob_rel_err: f64,
}

impl KappaReport {
    pub fn passed(&self) -> bool {
        self.kappa_rel_err <= 1e-8 && self.gram_rel_err <= 1e-10 && self.frob_rel_err <= 1e-10
    }
}

/// Stacks `m` random sign-diagonal copies of `A` and compares `κ(P)` with
/// `κ(A)`, the Gram matrices and the Frobenius norms.
pub fn kappa_invariance_report(a: &DMatrix<f64>, m: usize, seed: u64) -> Result<KappaReport> {
    if m == 0 {
        return Err(OrkaError::InvalidArgument("m must be positive".into()));
    }
    let (n, d) = a.shape();
    let mut r = rng::seeded(seed);
    let mut p = DMatrix::zeros(n * m, d);
    for l in 0..m {
        for j in 0..n {
            let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            for k in 0..d {
                p[(l * n + j, k)] = s * a[(j, k)];
            }
        }
    }
    let kappa_a = scaled_condition_number(a)?;
    let kappa_p = scaled_condition_number(&p)?;
    let gram_a = a.transpose() * a;
    let gram_p = p.transpose() * &p;
    let mf = m as f64;
    Ok(KappaReport {
        kappa_a,
        kappa_p,
        kappa_rel_err: (kappa_p - kappa_a).abs() / kappa_a,
        gram_rel_err: (gram_p - &gram_a * mf).norm() / gram_a.norm(),
        frob_rel_err: (p.norm_squared() - mf * a.norm_squared()).abs() / (mf * a.norm_squared()),
    })
}

pub fn kappa_invariance_check(a: &DMatrix<f64>, m: usize, seed: u64) -> Result<bool> {
    Ok(kappa_invariance_report(a, m, seed)?.passed())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo estimate of `E sup_{x∈cloud} |⟨g, x⟩|` over `g ~ N(0, I)`.
pub fn gaussian_complexity_mc(cloud: &[DVector<f64>], trials: usize, seed: u64) -> Result<McEstimate> {
    let d = cloud.first().ok_or_else(|| OrkaError::InvalidArgument("empty point cloud".into()))?.len();
    if cloud.iter().any(|x| x.len() != d) {
        return Err(OrkaError::InvalidArgument("points have mixed dimensions".into()));
    }
    if trials < 2 {
        return Err(OrkaError::InvalidArgument("need at least two trials".into()));
    }
    let mut r = rng::seeded(seed);
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let g = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut r));
            cloud.iter().map(|x| g.dot(x).abs()).fold(0.0, f64::max)
        })
        .collect();
    let (mean, var) = mean_var(&samples);
    Ok(McEstimate { mean, std_err: (var / trials as f64).sqrt() })
}

/// Mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorKind {
    Rka {
        kappa: f64,
    },
    Prskm {
        d: usize,
    },
    Sketch {
        d: usize,
    },
    /// Block Kaczmarz over `blocks` orthonormal blocks: the `δ = 0` case of `Rip`.
    Block {
        blocks: usize,
    },
    Rip {
        n: usize,
        delta: f64,
    },
    Gaussian {
        d: usize,
        delta: f64,
    },
}

/// Guaranteed per-iteration contraction factor of `E‖x_k − x̂‖²`.
pub fn convergence_floor(kind: FloorKind) -> Result<f64> {
    let bad = |msg: &str| Err(OrkaError::InvalidArgument(msg.into()));
    let delta_ok = |delta: f64| (0.0..1.0).contains(&delta);
    match kind {
        FloorKind::Rka { kappa } if kappa >= 1.0 => Ok(1.0 - 1.0 / (kappa * kappa)),
        FloorKind::Prskm { d } if d > 0 => Ok(1.0 - 1.0 / d as f64),
        FloorKind::Sketch { d } if d > 0 => Ok(1.0 - 1.0 / (3.0 * d as f64)),
        FloorKind::Block { blocks } if blocks > 0 => Ok(1.0 - 1.0 / blocks as f64),
        FloorKind::Rip { n, delta } if n > 0 && delta_ok(delta) => {
            Ok(1.0 - ((1.0 - delta) / (1.0 + delta)).powi(2) / n as f64)
        }
        FloorKind::Gaussian { d, delta } if d > 0 && delta_ok(delta) => {
            Ok(1.0 - (1.0 - delta).powi(2) / (1.0049 * d as f64))
        }
        FloorKind::Rka { .. } => bad("kappa must be at least 1"),
        FloorKind::Rip { .. } | FloorKind::Gaussian { .. } => bad("need a positive size and delta in [0, 1)"),
        _ => bad("size must be positive"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvpReport {
    pub t_ave: f64,
    pub theoretical_mean: f64,
    pub deviation: f64,
    pub lambda: f64,
    pub m_prime: usize,
    /// `4√(deviation·λ)`.
    pub radius: f64,
    pub hamming: Option<f64>,
}

impl FvpReport {
    pub const CSV_HEADER: &'static str = "t_ave,theoretical_mean,deviation,lambda,m_prime,radius,hamming";

    /// Measures `T_ave` at `x` against the stored thresholds.
    pub fn measure(meas: &OneBitMeasurements, x: &[f64], kind: FvpKind, lambda: f64) -> Result<Self> {
        let t = t_ave(meas.model(), x, meas.thresholds())?;
        let mean = fvp_mean(kind, lambda, crate::linalg::norm_sq(x).sqrt())?;
        let deviation = (t - mean).abs();
        Ok(FvpReport {
            t_ave: t,
            theoretical_mean: mean,
            deviation,
            lambda,
            m_prime: meas.total(),
            radius: recovery_radius(RadiusKind::Consistent, deviation, lambda)?,
            hamming: None,
        })
    }

    pub fn with_hamming(mut self, r1: &[i8], r2: &[i8]) -> Result<Self> {
        self.hamming = Some(hamming_distance(r1, r2)?);
        Ok(self)
    }

    pub fn csv_row(&self) -> String {
        let h = self.hamming.map(|h| format!("{h:.16e}")).unwrap_or_default();
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            self.t_ave, self.theoretical_mean, self.deviation, self.lambda, self.m_prime, self.radius, h
        )
    }
}

pub fn fvp_reports_to_csv(reports: &[FvpReport]) -> String {
    let mut out = String::from(FvpReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// `λ/2 + xᵀMx/(2λ)` with the exact second moment `M` of a random-frequency
/// cosine row, `M_tu = ½(1[t ≡ u] + 1[t + u ≡ 0])` (mod `d`). Differs from
/// the `½I` isotropy value by the `t + u ≡ 0` term.
pub fn dct_exact_mean(lambda: f64, x: &[f64]) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(OrkaError::InvalidArgument(format!("lambda {lambda} must be positive")));
    }
    let d = x.len();
    let mirrored: f64 = (0..d).map(|t| x[t] * x[(d - t) % d]).sum();
    let quad = 0.5 * (crate::linalg::norm_sq(x) + mirrored);
    Ok(lambda / 2.0 + quad / (2.0 * lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FvpModel {
    Gaussian,
    Dct,
}

/// Monte Carlo check of `T_ave` concentration on unit-norm signals drawn
/// from `set`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvpValidation {
    pub set: SignalRole,
    pub model: FvpModel,
    /// Total samples `m′ = n·m`.
    pub m_prime: usize,
    /// Threshold sequences per row; `n = m′/m`.
    pub sequences: usize,
    pub repetitions: usize,
    /// Dither half-width; `None` uses the dynamic range `max_j |⟨a_j, x⟩|`.
    pub lambda: Option<f64>,
    pub seed: u64,
}

impl FvpValidation {
    pub fn new(set: SignalRole, m_prime: usize) -> Self {
        FvpValidation { set, model: FvpModel::Gaussian, m_prime, sequences: 1, repetitions: 50, lambda: None, seed: 0 }
    }
}

/// One report per repetition, each with a fresh model, signal and dither.
pub fn validate_fvp(cfg: &FvpValidation) -> Result<Vec<FvpReport>> {
    let m = cfg.sequences;
    if m == 0 || cfg.m_prime == 0 || !cfg.m_prime.is_multiple_of(m) {
        return Err(OrkaError::InvalidArgument(format!("m' = {} must be a positive multiple of m = {m}", cfg.m_prime)));
    }
    let n = cfg.m_prime / m;
    (0..cfg.repetitions)
        .map(|rep| {
            let seed = rng::derive_seed(cfg.seed, rep as u64);
            let x = gen_signal(cfg.set, rng::derive_seed(seed, 2))?.normalized()?;
            let d = x.dim();
            let model = Arc::new(match cfg.model {
                FvpModel::Gaussian => gen_gaussian_model(n, d, rng::derive_seed(seed, 1))?,
                FvpModel::Dct => gen_dct_model(n, d, rng::derive_seed(seed, 1))?,
            });
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => dynamic_range(&model, x.values().as_slice()),
            };
            let dither = DitherConfig::new(DitherLaw::Uniform { lambda }, m);
            let meas =
                quantize_vector(&model, x.values().as_slice(), &dither, &NoiseConfig::None, rng::derive_seed(seed, 3))?;
            let kind = match cfg.model {
                FvpModel::Gaussian => FvpKind::Subgaussian,
                FvpModel::Dct => FvpKind::Dct,
            };
            FvpReport::measure(&meas, x.values().as_slice(), kind, lambda)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn t_ave_scalar_case() {
        let model = SamplingModel::from_row_major(1, 1, vec![1.0]).unwrap();
        assert_eq!(t_ave(&model, &[-2.5], &[0.0]).unwrap(), 2.5);
    }

    #[test]
    fn t_ave_matches_double_loop() {
        let model = gen_gaussian_model(7, 4, 1).unwrap();
        let x = [0.3, -1.0, 0.5, 2.0];
        let mut r = rng::seeded(2);
        let taus: Vec<f64> = (0..21).map(|_| r.random_range(-3.0..3.0)).collect();
        let mut brute = 0.0;
        for j in 0..7 {
            let y: f64 = (0..4).map(|k| model.row(j)[k] * x[k]).sum();
            for l in 0..3 {
                brute += (y - taus[j * 3 + l]).abs();
            }
        }
        assert_relative_eq!(t_ave(&model, &x, &taus).unwrap(), brute / 21.0, epsilon = 1e-12);
        assert!(t_ave(&model, &x, &taus[..20]).is_err());
    }

    #[test]
    fn t_ave_at_origin_is_half_lambda() {
        let model = Arc::new(gen_gaussian_model(20_000, 3, 3).unwrap());
        let x = DVector::zeros(3);
        let meas = quantize_vector(
            &model,
            x.as_slice(),
            &DitherConfig::new(DitherLaw::Uniform { lambda: 2.0 }, 5),
            &NoiseConfig::None,
            4,
        )
        .unwrap();
        let t = t_ave(&model, x.as_slice(), meas.thresholds()).unwrap();
        // sd of |τ| is λ/√12, so 1e5 samples give se ≈ 0.0018
        assert!((t - 1.0).abs() < 0.01, "{t}");
    }

    #[test]
    fn gaussian_t_ave_concentrates_on_fvp_mean() {
        let d = 8;
        let model = Arc::new(gen_gaussian_model(20_000, d, 5).unwrap());
        let x = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        let lambda = crate::sensing::dynamic_range(&model, x.as_slice());
        let meas = quantize_vector(
            &model,
            x.as_slice(),
            &DitherConfig::new(DitherLaw::Uniform { lambda }, 5),
            &NoiseConfig::None,
            6,
        )
        .unwrap();
        let rep = FvpReport::measure(&meas, x.as_slice(), FvpKind::Subgaussian, lambda).unwrap();
        assert_eq!(rep.m_prime, 100_000);
        // per-sample sd is below λ/2, so 3 se < 1.5λ/√(1e5)
        assert!(rep.deviation < 1.5 * lambda / (1e5f64).sqrt() * 2.0, "{rep:?}");
    }

    #[test]
    fn dct_exact_mean_matches_brute_force_moment() {
        let d = 6;
        let x: Vec<f64> = (0..d).map(|t| (t as f64 + 0.5).sin()).collect();
        // average over every frequency of E_τ|⟨a_k, x⟩ − τ| = λ/2 + ⟨a_k, x⟩²/(2λ)
        let model = crate::sensing::dct_model_with_frequencies(d, (0..d).collect()).unwrap();
        let lambda = 7.0;
        let brute =
            (0..d).map(|k| lambda / 2.0 + crate::linalg::dot(model.row(k), &x).powi(2) / (2.0 * lambda)).sum::<f64>()
                / d as f64;
        assert_relative_eq!(dct_exact_mean(lambda, &x).unwrap(), brute, epsilon = 1e-12);
        // a signal with x_t = −x_{−t} has no mirrored term
        let odd = [0.0, 1.0, 0.0, 0.0, 0.0, -1.0];
        assert_relative_eq!(
            dct_exact_mean(1.0, &odd).unwrap(),
            fvp_mean(FvpKind::Dct, 1.0, 2f64.sqrt()).unwrap() - 0.5
        );
    }

    #[test]
    fn fvp_validation_is_seeded_and_sized() {
        let mut cfg = FvpValidation::new(SignalRole::Sparse { d: 20, s: 3 }, 400);
        cfg.repetitions = 3;
        cfg.sequences = 4;
        let a = validate_fvp(&cfg).unwrap();
        assert_eq!(a, validate_fvp(&cfg).unwrap());
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|r| r.m_prime == 400 && r.deviation >= 0.0));
        cfg.sequences = 3;
        assert!(validate_fvp(&cfg).is_err());
    }

    #[test]
    fn fvp_mean_values() {
        assert_eq!(fvp_mean(FvpKind::Subgaussian, 3.0, 0.0).unwrap(), 1.5);
        assert_eq!(fvp_mean(FvpKind::Dct, 3.0, 0.0).unwrap(), 1.5);
        assert_eq!(fvp_mean(FvpKind::Subgaussian, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(fvp_mean(FvpKind::Dct, 1.0, 1.0).unwrap(), 0.75);
        assert_relative_eq!(fvp_mean(FvpKind::NoDr { n: 4, mu_prime: 2.0 }, 1.0, 1.0).unwrap(), 0.75 + 0.5);
        assert!(fvp_mean(FvpKind::Dct, 0.0, 1.0).is_err());
    }

    #[test]
    fn complexity_shapes() {
        let b = |set, eps| ComplexityBudget { set, eps, rho: 0.5 };
        let sparse = b(SetKind::Sparse { s: 10, d: 10 }, 0.1);
        assert_eq!(sample_complexity(&sparse).unwrap(), 0.0);
        assert!(sparse.is_degenerate());
        let r1 = sample_complexity(&b(SetKind::LowRank { n1: 5, n2: 6, r: 1 }, 0.1)).unwrap();
        let r2 = sample_complexity(&b(SetKind::LowRank { n1: 5, n2: 6, r: 2 }, 0.1)).unwrap();
        assert_relative_eq!(r2, 2.0 * r1);
        let e1 = sample_complexity(&b(SetKind::Sparse { s: 3, d: 50 }, 0.2)).unwrap();
        let e2 = sample_complexity(&b(SetKind::Sparse { s: 3, d: 50 }, 0.1)).unwrap();
        assert_relative_eq!(e2, 4.0 * e1, epsilon = 1e-9);
        assert_relative_eq!(sample_complexity(&b(SetKind::Arbitrary { gamma: 2.0 }, 0.5)).unwrap(), 64.0);
        assert!(sample_complexity(&ComplexityBudget { rho: 0.0, ..sparse }).is_err());
    }

    #[test]
    fn radius_values() {
        assert_relative_eq!(recovery_radius(RadiusKind::Consistent, 0.01, 1.0).unwrap(), 0.4, epsilon = 1e-15);
        let c = recovery_radius(RadiusKind::Consistent, 0.02, 3.0).unwrap();
        assert_eq!(recovery_radius(RadiusKind::Hamming { d_h: 0.0 }, 0.02, 3.0).unwrap(), c);
        assert_eq!(recovery_radius(RadiusKind::NoDrL { n: 10, l: 0 }, 0.02, 3.0).unwrap(), c);
        assert_eq!(
            recovery_radius(RadiusKind::NoDr { n: 10 }, 0.02, 3.0).unwrap(),
            recovery_radius(RadiusKind::NoDrL { n: 10, l: 1 }, 0.02, 3.0).unwrap()
        );
        assert!(recovery_radius(RadiusKind::NoDrL { n: 10, l: 10 }, 0.02, 3.0).is_err());
        assert!(recovery_radius(RadiusKind::Hamming { d_h: 1.5 }, 0.02, 3.0).is_err());
    }

    #[test]
    fn hamming_values() {
        assert_eq!(hamming_distance(&[1, -1, 1], &[1, -1, 1]).unwrap(), 0.0);
        assert_relative_eq!(hamming_distance(&[1, 1, -1], &[1, -1, -1]).unwrap(), 1.0 / 3.0);
        assert!(hamming_distance(&[1], &[1, 1]).is_err());
        let mut r = rng::seeded(9);
        let a: Vec<i8> = (0..500).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        let b: Vec<i8> = (0..500).map(|_| if r.random_bool(0.3) { 1 } else { -1 }).collect();
        let mut count = 0;
        for i in 0..500 {
            if a[i] != b[i] {
                count += 1;
            }
        }
        assert_eq!(hamming_distance(&a, &b).unwrap(), count as f64 / 500.0);
    }

    #[test]
    fn kappa_examples() {
        assert_relative_eq!(scaled_condition_number(&DMatrix::identity(4, 4)).unwrap(), 2.0, epsilon = 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert_relative_eq!(scaled_condition_number(&d).unwrap(), 5f64.sqrt(), epsilon = 1e-14);
        assert!(matches!(
            scaled_condition_number(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])),
            Err(OrkaError::RankDeficient { .. })
        ));
        assert!(scaled_condition_number(&DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn kappa_invariance() {
        let a = gen_gaussian_model(100, 10, 10).unwrap().to_matrix();
        for m in [1, 5] {
            let rep = kappa_invariance_report(&a, m, m as u64).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
        let id = DMatrix::<f64>::identity(6, 6);
        let rep = kappa_invariance_report(&id, 3, 1).unwrap();
        assert_relative_eq!(rep.kappa_p, 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_complexity_examples() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let est = gaussian_complexity_mc(std::slice::from_ref(&e1), 40_000, 1).unwrap();
        assert!((est.mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 3.5 * est.std_err);
        assert_eq!(gaussian_complexity_mc(&[DVector::zeros(3)], 10, 1).unwrap().mean, 0.0);
        let twice = gaussian_complexity_mc(&[e1.clone() * 2.0], 40_000, 1).unwrap();
        assert_relative_eq!(twice.mean, 2.0 * est.mean, epsilon = 1e-12);
        assert!(gaussian_complexity_mc(&[], 10, 1).is_err());
    }

    #[test]
    fn floors() {
        let d = 10;
        assert_relative_eq!(
            convergence_floor(FloorKind::Rka { kappa: (d as f64).sqrt() }).unwrap(),
            convergence_floor(FloorKind::Prskm { d }).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(convergence_floor(FloorKind::Rip { n: 7, delta: 0.0 }).unwrap(), 1.0 - 1.0 / 7.0);
        assert!(
            convergence_floor(FloorKind::Sketch { d }).unwrap() > convergence_floor(FloorKind::Prskm { d }).unwrap()
        );
        assert!(convergence_floor(FloorKind::Rka { kappa: 0.5 }).is_err());
        assert!(convergence_floor(FloorKind::Gaussian { d, delta: 1.0 }).is_err());
    }

    #[test]
    fn report_csv() {
        let rep = FvpReport {
            t_ave: 1.0,
            theoretical_mean: 0.5,
            deviation: 0.5,
            lambda: 1.0,
            m_prime: 10,
            radius: 4.0 * 0.5f64.sqrt(),
            hamming: None,
        };
        let csv = fvp_reports_to_csv(&[rep.clone(), rep.with_hamming(&[1, 1], &[1, -1]).unwrap()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], FvpReport::CSV_HEADER);
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with("5.0000000000000000e-1"));
    }
}
