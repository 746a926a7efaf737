//! Sampling models, ground-truth signals, dither thresholds and one-bit
//! measurements.

mod io;

pub use io::{ModelDescriptor, MAGIC};

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{OrkaError, Result};
use crate::linalg::{dot, norm_sq};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    DenseGaussian,
    DctRandomFreq,
    Explicit,
}

/// An `n × d` sensing matrix, stored row-major so that single rows are
/// contiguous for the row-action solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingModel {
    kind: ModelKind,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_norms_sq: Vec<f64>,
    freq_indices: Option<Vec<usize>>,
    seed: Option<u64>,
    gram: GramCache,
}

/// Lazily computed `AAᵀ`; ignored by equality.
#[derive(Clone, Debug, Default)]
struct GramCache(OnceLock<Arc<DMatrix<f64>>>);

impl PartialEq for GramCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl SamplingModel {
    fn from_parts(
        kind: ModelKind,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        freq_indices: Option<Vec<usize>>,
        seed: Option<u64>,
    ) -> Self {
        let row_norms_sq = data.chunks_exact(cols).map(norm_sq).collect();
        SamplingModel { kind, rows, cols, data, row_norms_sq, freq_indices, seed, gram: GramCache::default() }
    }

    /// Explicit model from a row-major buffer.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(OrkaError::InvalidArgument("model needs n, d >= 1".into()));
        }
        if data.len() != rows * cols {
            return Err(OrkaError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self::from_parts(ModelKind::Explicit, rows, cols, data, None, None))
    }

    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let data = a.transpose().as_slice().to_vec();
        Self::from_row_major(a.nrows(), a.ncols(), data)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    #[inline]
    pub fn row_norm_sq(&self, j: usize) -> f64 {
        self.row_norms_sq[j]
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.row_norms_sq.iter().sum()
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    /// Frequency indices k with ω = k/d, for random-frequency cosine models.
    pub fn freq_indices(&self) -> Option<&[usize]> {
        self.freq_indices.as_deref()
    }

    pub fn frequencies(&self) -> Option<Vec<f64>> {
        self.freq_indices.as_ref().map(|f| f.iter().map(|&k| k as f64 / self.cols as f64).collect())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.cols, "signal length must match model columns");
        DVector::from_iterator(self.rows, self.data.chunks_exact(self.cols).map(|a| dot(a, x)))
    }

    /// Row Gram matrix `AAᵀ`, computed on first use and shared by clones
    /// made afterwards.
    pub fn gram(&self) -> Arc<DMatrix<f64>> {
        self.gram
            .0
            .get_or_init(|| {
                let a = self.to_matrix();
                Arc::new(&a * a.transpose())
            })
            .clone()
    }

    /// Empirical second moment `(1/n) Σ a_j a_jᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let a = self.to_matrix();
        (a.transpose() * a) / self.rows as f64
    }
}

/// `n × d` matrix of i.i.d. N(0,1) entries.
pub fn gen_gaussian_model(n: usize, d: usize, seed: u64) -> Result<SamplingModel> {
    if n == 0 || d == 0 {
        return Err(OrkaError::InvalidArgument("model needs n, d >= 1".into()));
    }
    let mut r = rng::seeded(seed);
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
    Ok(SamplingModel::from_parts(ModelKind::DenseGaussian, n, d, data, None, Some(seed)))
}

/// Random-frequency cosine rows: `a_k[t] = cos(2π ω_k t)` with ω_k uniform on
/// `{0, 1/d, …, (d−1)/d}`.
pub fn gen_dct_model(n: usize, d: usize, seed: u64) -> Result<SamplingModel> {
    if n == 0 || d == 0 {
        return Err(OrkaError::InvalidArgument("model needs n, d >= 1".into()));
    }
    let mut r = rng::seeded(seed);
    let freqs: Vec<usize> = (0..n).map(|_| r.random_range(0..d)).collect();
    Ok(dct_model_from_indices(d, freqs, Some(seed)))
}

pub(crate) fn dct_model_from_indices(d: usize, freqs: Vec<usize>, seed: Option<u64>) -> SamplingModel {
    let n = freqs.len();
    let mut data = Vec::with_capacity(n * d);
    for &k in &freqs {
        for t in 0..d {
            // reduce k·t mod d first so large products keep full precision
            let phase = ((k * t) % d) as f64 / d as f64;
            data.push((2.0 * PI * phase).cos());
        }
    }
    SamplingModel::from_parts(ModelKind::DctRandomFreq, n, d, data, Some(freqs), seed)
}

/// Cosine model with caller-chosen frequency indices.
pub fn dct_model_with_frequencies(d: usize, freq_indices: Vec<usize>) -> Result<SamplingModel> {
    if d == 0 || freq_indices.is_empty() {
        return Err(OrkaError::InvalidArgument("model needs n, d >= 1".into()));
    }
    if let Some(&k) = freq_indices.iter().find(|&&k| k >= d) {
        return Err(OrkaError::InvalidArgument(format!("frequency index {k} outside 0..{d}")));
    }
    Ok(dct_model_from_indices(d, freq_indices, None))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SignalRole {
    Dense { d: usize },
    Sparse { d: usize, s: usize },
    LowRank { n1: usize, n2: usize, r: usize },
}

impl SignalRole {
    pub fn dim(&self) -> usize {
        match *self {
            SignalRole::Dense { d } | SignalRole::Sparse { d, .. } => d,
            SignalRole::LowRank { n1, n2, .. } => n1 * n2,
        }
    }
}

/// Ground-truth signal. Matrices are held as their column-major
/// vectorization, so `⟨A_j, X⟩ = vec(A_j)·vec(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredSignal {
    role: SignalRole,
    values: DVector<f64>,
}

impl StructuredSignal {
    pub fn dense(values: DVector<f64>) -> Self {
        StructuredSignal { role: SignalRole::Dense { d: values.len() }, values }
    }

    pub fn sparse(values: DVector<f64>) -> Self {
        let s = values.iter().filter(|v| **v != 0.0).count();
        StructuredSignal { role: SignalRole::Sparse { d: values.len(), s }, values }
    }

    pub fn low_rank(x: &DMatrix<f64>, r: usize) -> Self {
        StructuredSignal {
            role: SignalRole::LowRank { n1: x.nrows(), n2: x.ncols(), r },
            values: DVector::from_column_slice(x.as_slice()),
        }
    }

    pub fn role(&self) -> SignalRole {
        self.role
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0.0).collect()
    }

    /// Matrix view for low-rank signals; a single column otherwise.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        match self.role {
            SignalRole::LowRank { n1, n2, .. } => DMatrix::from_column_slice(n1, n2, self.values.as_slice()),
            _ => DMatrix::from_column_slice(self.values.len(), 1, self.values.as_slice()),
        }
    }

    /// Same signal scaled to unit Euclidean norm.
    pub fn normalized(&self) -> Result<Self> {
        let nrm = self.values.norm();
        if nrm == 0.0 {
            return Err(OrkaError::InvalidArgument("cannot normalize the zero signal".into()));
        }
        Ok(StructuredSignal { role: self.role, values: &self.values / nrm })
    }
}

pub fn gen_signal(role: SignalRole, seed: u64) -> Result<StructuredSignal> {
    let mut r = rng::seeded(seed);
    match role {
        SignalRole::Dense { d } => {
            let v = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut r)));
            Ok(StructuredSignal { role, values: v })
        }
        SignalRole::Sparse { d, s } => {
            if s > d {
                return Err(OrkaError::InvalidArgument(format!("sparsity {s} exceeds dimension {d}")));
            }
            let mut support = rand::seq::index::sample(&mut r, d, s).into_vec();
            support.sort_unstable();
            let mut v = DVector::zeros(d);
            for &i in &support {
                // resample the measure-zero event of an exact zero value
                let mut g: f64 = StandardNormal.sample(&mut r);
                while g == 0.0 {
                    g = StandardNormal.sample(&mut r);
                }
                v[i] = g;
            }
            Ok(StructuredSignal { role, values: v })
        }
        SignalRole::LowRank { n1, n2, r: rank } => {
            if rank > n1.min(n2) {
                return Err(OrkaError::InvalidArgument(format!("rank {rank} exceeds min({n1}, {n2})")));
            }
            let u = DMatrix::<f64>::from_fn(n1, rank, |_, _| StandardNormal.sample(&mut r));
            let w = DMatrix::from_fn(rank, n2, |_, _| StandardNormal.sample(&mut r));
            let x = u * w;
            Ok(StructuredSignal { role, values: DVector::from_column_slice(x.as_slice()) })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DitherLaw {
    /// τ ~ U[−λ, λ].
    Uniform { lambda: f64 },
    /// τ ~ N(0, σ²).
    Gaussian { sigma: f64 },
    /// τ ~ U[−β_y, β_y] with β_y the clean dynamic range.
    UniformDynamicRange,
    /// τ ≡ 0 (ditherless sign measurements).
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DitherConfig {
    pub law: DitherLaw,
    pub sequences: usize,
}

impl DitherConfig {
    pub fn new(law: DitherLaw, sequences: usize) -> Self {
        DitherConfig { law, sequences }
    }

    fn validate(&self) -> Result<()> {
        if self.sequences == 0 {
            return Err(OrkaError::InvalidArgument("need at least one threshold sequence".into()));
        }
        match self.law {
            DitherLaw::Uniform { lambda } if !(lambda > 0.0) => {
                Err(OrkaError::InvalidArgument("uniform dither needs lambda > 0".into()))
            }
            DitherLaw::Gaussian { sigma } if !(sigma > 0.0) => {
                Err(OrkaError::InvalidArgument("gaussian dither needs sigma > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseConfig {
    None,
    /// z ~ N(0, σ_z²) before the comparator.
    Gaussian {
        sigma: f64,
    },
    /// With probability `p`, z = ±amp with a fair random sign; otherwise 0.
    Impulsive {
        p: f64,
        amp: f64,
    },
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseConfig::Gaussian { sigma } if !(sigma >= 0.0) => {
                Err(OrkaError::InvalidArgument("noise sigma must be >= 0".into()))
            }
            NoiseConfig::Impulsive { p, amp } if !(0.0..=1.0).contains(&p) || !(amp >= 0.0) => {
                Err(OrkaError::InvalidArgument("impulsive noise needs p in [0,1], amp >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, r: &mut rng::Rng) -> f64 {
        match *self {
            NoiseConfig::None => 0.0,
            NoiseConfig::Gaussian { sigma } => sigma * gauss(r),
            NoiseConfig::Impulsive { p, amp } => {
                if r.random_bool(p) {
                    if r.random_bool(0.5) {
                        amp
                    } else {
                        -amp
                    }
                } else {
                    0.0
                }
            }
        }
    }
}

fn gauss<R: rand::Rng + ?Sized>(r: &mut R) -> f64 {
    StandardNormal.sample(r)
}

/// sgn with sgn(0) = +1.
#[inline]
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Signs `R` and thresholds `Γ` (both `n × m`, stored row-major: entry
/// `(j, ℓ)` at `j·m + ℓ`) together with the model that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBitMeasurements {
    model: Arc<SamplingModel>,
    m: usize,
    signs: Vec<i8>,
    thresholds: Vec<f64>,
}

impl OneBitMeasurements {
    pub fn new(model: Arc<SamplingModel>, m: usize, signs: Vec<i8>, thresholds: Vec<f64>) -> Result<Self> {
        let n = model.rows();
        if m == 0 {
            return Err(OrkaError::InvalidArgument("need at least one threshold sequence".into()));
        }
        if signs.len() != n * m {
            return Err(OrkaError::DimensionMismatch { expected: n * m, got: signs.len() });
        }
        if thresholds.len() != n * m {
            return Err(OrkaError::DimensionMismatch { expected: n * m, got: thresholds.len() });
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(OrkaError::InvalidArgument("signs must be +1 or -1".into()));
        }
        Ok(OneBitMeasurements { model, m, signs, thresholds })
    }

    pub fn model(&self) -> &SamplingModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<SamplingModel> {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.rows()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.model.cols()
    }

    /// Total number of one-bit samples m′ = m·n.
    pub fn total(&self) -> usize {
        self.m * self.model.rows()
    }

    #[inline]
    pub fn sign(&self, j: usize, l: usize) -> i8 {
        self.signs[j * self.m + l]
    }

    #[inline]
    pub fn threshold(&self, j: usize, l: usize) -> f64 {
        self.thresholds[j * self.m + l]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn signs_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.m, |j, l| self.sign(j, l) as f64)
    }

    pub fn thresholds_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.m, |j, l| self.threshold(j, l))
    }

    /// Same signs, new thresholds (row-major `n × m`).
    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Self> {
        Self::new(self.model.clone(), self.m, self.signs.clone(), thresholds)
    }

    /// Copy with the sign at `(j, ℓ)` negated.
    pub fn with_flipped_sign(&self, j: usize, l: usize) -> Self {
        let mut out = self.clone();
        out.signs[j * self.m + l] = -out.signs[j * self.m + l];
        out
    }
}

/// Dither thresholds (row-major `n × m`) for the clean measurements `y`.
pub fn draw_thresholds(y: &[f64], dither: &DitherConfig, seed: u64) -> Result<Vec<f64>> {
    dither.validate()?;
    let n = y.len();
    let m = dither.sequences;
    let mut r = rng::stream(seed, 1);
    let lambda = match dither.law {
        DitherLaw::Uniform { lambda } => lambda,
        DitherLaw::UniformDynamicRange => y.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
        _ => 0.0,
    };
    let out = match dither.law {
        DitherLaw::Zero => vec![0.0; n * m],
        DitherLaw::Gaussian { sigma } => (0..n * m).map(|_| sigma * gauss(&mut r)).collect(),
        DitherLaw::Uniform { .. } | DitherLaw::UniformDynamicRange => {
            if lambda == 0.0 {
                vec![0.0; n * m]
            } else {
                (0..n * m).map(|_| r.random_range(-lambda..=lambda)).collect()
            }
        }
    };
    Ok(out)
}

/// One-bit measurements of `x`: `r_j^(ℓ) = sgn(⟨a_j,x⟩ + z_j^(ℓ) − τ_j^(ℓ))`,
/// noise drawn independently per `(j, ℓ)`.
pub fn quantize(
    model: &Arc<SamplingModel>,
    x: &StructuredSignal,
    dither: &DitherConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<OneBitMeasurements> {
    quantize_vector(model, x.values().as_slice(), dither, noise, seed)
}

pub fn quantize_vector(
    model: &Arc<SamplingModel>,
    x: &[f64],
    dither: &DitherConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<OneBitMeasurements> {
    if x.len() != model.cols() {
        return Err(OrkaError::DimensionMismatch { expected: model.cols(), got: x.len() });
    }
    let y = model.apply(x);
    let thresholds = draw_thresholds(y.as_slice(), dither, seed)?;
    quantize_with_thresholds(model, x, dither.sequences, thresholds, noise, seed)
}

/// Quantizes against caller-supplied thresholds (row-major `n × m`).
pub fn quantize_with_thresholds(
    model: &Arc<SamplingModel>,
    x: &[f64],
    m: usize,
    thresholds: Vec<f64>,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<OneBitMeasurements> {
    noise.validate()?;
    if x.len() != model.cols() {
        return Err(OrkaError::DimensionMismatch { expected: model.cols(), got: x.len() });
    }
    let n = model.rows();
    if m == 0 || thresholds.len() != n * m {
        return Err(OrkaError::DimensionMismatch { expected: n * m.max(1), got: thresholds.len() });
    }
    let y = model.apply(x);
    let mut r = rng::stream(seed, 2);
    let mut signs = Vec::with_capacity(n * m);
    for j in 0..n {
        for l in 0..m {
            let z = noise.draw(&mut r);
            signs.push(sign(y[j] + z - thresholds[j * m + l]));
        }
    }
    OneBitMeasurements::new(model.clone(), m, signs, thresholds)
}

/// β_y = max_j |⟨a_j, x⟩|.
pub fn dynamic_range(model: &SamplingModel, x: &[f64]) -> f64 {
    model.apply(x).iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
