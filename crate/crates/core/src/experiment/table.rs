use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TrialStatus {
    Ok,
    Aborted(String),
}

/// One reported value: NMSE of `arm` at sweep point `point` in `trial`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub arm: String,
    /// Position of the arm in the plan, used for ordering.
    pub arm_index: usize,
    pub point: usize,
    /// Sweep-variable value (the iteration count for checkpointed runs).
    pub value: f64,
    pub trial: usize,
    /// `NaN` when aborted.
    pub nmse: f64,
    pub iterations: usize,
    pub wall: Duration,
    pub status: TrialStatus,
}

impl TrialResult {
    pub fn is_aborted(&self) -> bool {
        matches!(self.status, TrialStatus::Aborted(_))
    }

    fn sort_key(&self) -> (usize, usize, u64, usize) {
        (self.arm_index, self.point, self.value.to_bits(), self.trial)
    }
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn sort_results(results: &mut [TrialResult]) {
    results.sort_by_key(|a| a.sort_key());
}

pub(crate) fn results_to_csv(preset: &str, results: &[TrialResult], timings: bool) -> String {
    let mut out = String::from("preset,arm,point,value,trial,nmse,iterations,status");
    if timings {
        out.push_str(",wall_ms");
    }
    out.push('\n');
    for r in results {
        let status = match &r.status {
            TrialStatus::Ok => "ok".to_string(),
            TrialStatus::Aborted(msg) => format!("\"aborted: {}\"", msg.replace('"', "'")),
        };
        let _ = write!(
            out,
            "{preset},{},{},{},{},{},{},{status}",
            r.arm,
            r.point,
            fmt_f64(r.value),
            r.trial,
            fmt_f64(r.nmse),
            r.iterations
        );
        if timings {
            let _ = write!(out, ",{}", fmt_f64(r.wall.as_secs_f64() * 1e3));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub arm: String,
    pub point: usize,
    pub value: f64,
    pub completed: usize,
    pub aborted: usize,
    pub median: f64,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
}

impl SummaryRow {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl SummaryTable {
    /// Aggregates per (arm, point, value); rows come out in result order.
    pub fn from_results(results: &[TrialResult]) -> Self {
        let mut sorted = results.to_vec();
        sort_results(&mut sorted);
        let mut rows = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let key = (sorted[i].arm_index, sorted[i].point, sorted[i].value.to_bits());
            let mut j = i;
            while j < sorted.len() && (sorted[j].arm_index, sorted[j].point, sorted[j].value.to_bits()) == key {
                j += 1;
            }
            let group = &sorted[i..j];
            let mut vals: Vec<f64> = group.iter().filter(|r| !r.is_aborted()).map(|r| r.nmse).collect();
            vals.sort_by(f64::total_cmp);
            let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            rows.push(SummaryRow {
                arm: group[0].arm.clone(),
                point: group[0].point,
                value: group[0].value,
                completed: vals.len(),
                aborted: group.len() - vals.len(),
                median: quantile_sorted(&vals, 0.5),
                mean,
                q25: quantile_sorted(&vals, 0.25),
                q75: quantile_sorted(&vals, 0.75),
            });
            i = j;
        }
        SummaryTable { rows }
    }

    pub fn get(&self, arm: &str, value: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.arm == arm && r.value == value)
    }

    pub fn median(&self, arm: &str, value: f64) -> Option<f64> {
        self.get(arm, value).map(|r| r.median)
    }

    /// Distinct sweep values in order of first appearance.
    pub fn values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.value) {
                out.push(r.value);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,point,value,completed,aborted,median,mean,q25,q75,iqr\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.arm,
                r.point,
                fmt_f64(r.value),
                r.completed,
                r.aborted,
                fmt_f64(r.median),
                fmt_f64(r.mean),
                fmt_f64(r.q25),
                fmt_f64(r.q75),
                fmt_f64(r.iqr())
            );
        }
        out
    }
}
