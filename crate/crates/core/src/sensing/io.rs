//! Measurement records in a flat binary layout and in JSON.
//!
//! Binary layout (all integers little-endian):
//!
//! | offset          | size      | field                                  |
//! |-----------------|-----------|----------------------------------------|
//! | 0               | 4         | magic `OBM1`                           |
//! | 4               | 4         | format version (u32, currently 1)      |
//! | 8               | 8         | n (u64)                                |
//! | 16              | 8         | m (u64)                                |
//! | 24              | 8         | d (u64)                                |
//! | 32              | n·m       | signs as i8, row-major (j·m + ℓ)       |
//! | 32 + n·m        | 8·n·m     | thresholds as f64 bits, row-major      |
//! | 32 + 9·n·m      | 8         | descriptor length L (u64)              |
//! | 40 + 9·n·m      | L         | model descriptor, UTF-8 JSON           |

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{dct_model_from_indices, gen_gaussian_model, ModelKind, OneBitMeasurements, SamplingModel};
use crate::error::{OrkaError, Result};

pub const MAGIC: &[u8; 4] = b"OBM1";
const VERSION: u32 = 1;

/// Enough information to rebuild a sampling model: Gaussian models by seed,
/// cosine models by frequency index, explicit models by their entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: ModelKind,
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<f64>>,
}

impl ModelDescriptor {
    pub fn of(model: &SamplingModel) -> Self {
        let mut desc = ModelDescriptor {
            kind: model.kind(),
            rows: model.rows(),
            cols: model.cols(),
            seed: model.seed(),
            freq_indices: None,
            entries: None,
        };
        match model.kind() {
            ModelKind::DenseGaussian if model.seed().is_some() => {}
            ModelKind::DctRandomFreq => desc.freq_indices = model.freq_indices().map(|f| f.to_vec()),
            _ => desc.entries = Some(model.row_major().to_vec()),
        }
        desc
    }

    pub fn to_model(&self) -> Result<SamplingModel> {
        if let Some(entries) = &self.entries {
            let mut m = SamplingModel::from_row_major(self.rows, self.cols, entries.clone())?;
            m.kind = self.kind;
            m.seed = self.seed;
            return Ok(m);
        }
        match self.kind {
            ModelKind::DenseGaussian => {
                let seed = self.seed.ok_or_else(|| OrkaError::Format("gaussian descriptor without seed".into()))?;
                gen_gaussian_model(self.rows, self.cols, seed)
            }
            ModelKind::DctRandomFreq => {
                let f = self
                    .freq_indices
                    .clone()
                    .ok_or_else(|| OrkaError::Format("cosine descriptor without frequencies".into()))?;
                if f.len() != self.rows || f.iter().any(|&k| k >= self.cols) {
                    return Err(OrkaError::Format("bad frequency list".into()));
                }
                Ok(dct_model_from_indices(self.cols, f, self.seed))
            }
            ModelKind::Explicit => Err(OrkaError::Format("explicit descriptor without entries".into())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    n: usize,
    m: usize,
    d: usize,
    signs: Vec<i8>,
    thresholds: Vec<f64>,
    model: ModelDescriptor,
}

impl OneBitMeasurements {
    pub fn to_bytes(&self) -> Vec<u8> {
        let nm = self.signs.len();
        let desc = serde_json::to_vec(&ModelDescriptor::of(&self.model)).expect("descriptor serializes");
        let mut out = Vec::with_capacity(40 + 9 * nm + desc.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.n(), self.m, self.d()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend(self.signs.iter().map(|&s| s as u8));
        for t in &self.thresholds {
            out.extend_from_slice(&t.to_bits().to_le_bytes());
        }
        out.extend_from_slice(&(desc.len() as u64).to_le_bytes());
        out.extend_from_slice(&desc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(OrkaError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(OrkaError::Format(format!("unsupported version {version}")));
        }
        let n = cur.u64()? as usize;
        let m = cur.u64()? as usize;
        let d = cur.u64()? as usize;
        let nm = n.checked_mul(m).ok_or_else(|| OrkaError::Format("size overflow".into()))?;
        let signs: Vec<i8> = cur.take(nm)?.iter().map(|&b| b as i8).collect();
        let mut thresholds = Vec::with_capacity(nm);
        for _ in 0..nm {
            thresholds.push(f64::from_bits(cur.u64()?));
        }
        let len = cur.u64()? as usize;
        let desc: ModelDescriptor = serde_json::from_slice(cur.take(len)?)?;
        if cur.pos != bytes.len() {
            return Err(OrkaError::Format("trailing bytes".into()));
        }
        Self::assemble(n, m, d, signs, thresholds, desc)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = Record {
            n: self.n(),
            m: self.m,
            d: self.d(),
            signs: self.signs.clone(),
            thresholds: self.thresholds.clone(),
            model: ModelDescriptor::of(&self.model),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Record = serde_json::from_str(text)?;
        Self::assemble(rec.n, rec.m, rec.d, rec.signs, rec.thresholds, rec.model)
    }

    fn assemble(
        n: usize,
        m: usize,
        d: usize,
        signs: Vec<i8>,
        thresholds: Vec<f64>,
        desc: ModelDescriptor,
    ) -> Result<Self> {
        if desc.rows != n || desc.cols != d {
            return Err(OrkaError::Format("descriptor shape disagrees with header".into()));
        }
        let model = Arc::new(desc.to_model()?);
        OneBitMeasurements::new(model, m, signs, thresholds)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| OrkaError::Format("truncated record".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn sample(model: SamplingModel) -> OneBitMeasurements {
        let model = Arc::new(model);
        let x = gen_signal(SignalRole::Dense { d: model.cols() }, 3).unwrap();
        let dither = DitherConfig::new(DitherLaw::Gaussian { sigma: 1.3 }, 3);
        quantize(&model, &x, &dither, &NoiseConfig::Gaussian { sigma: 0.1 }, 4).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        for model in [
            gen_gaussian_model(17, 5, 1).unwrap(),
            gen_dct_model(9, 6, 2).unwrap(),
            SamplingModel::from_row_major(2, 2, vec![1.0, -0.5, 1e-300, 3.0]).unwrap(),
        ] {
            let meas = sample(model);
            let bytes = meas.to_bytes();
            assert_eq!(&bytes[..4], MAGIC);
            let back = OneBitMeasurements::from_bytes(&bytes).unwrap();
            assert_eq!(back.signs(), meas.signs());
            let bits = |v: &[f64]| v.iter().map(|t| t.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(back.thresholds()), bits(meas.thresholds()));
            assert_eq!(back.model().row_major(), meas.model().row_major());
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let meas = sample(gen_gaussian_model(11, 4, 8).unwrap());
        let back = OneBitMeasurements::from_json(&meas.to_json().unwrap()).unwrap();
        assert_eq!(back, meas);
    }

    #[test]
    fn corrupt_records_are_rejected() {
        let meas = sample(gen_gaussian_model(4, 2, 8).unwrap());
        let bytes = meas.to_bytes();
        assert!(OneBitMeasurements::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(OneBitMeasurements::from_bytes(&bad).is_err());
        let mut zero_sign = bytes;
        zero_sign[32] = 0;
        assert!(OneBitMeasurements::from_bytes(&zero_sign).is_err());
    }
}
