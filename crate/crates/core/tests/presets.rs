//! Preset golden files and the CSV output contract.
//!
//! Regenerate the golden plans with `ORKA_UPDATE_GOLDEN=1 cargo test --test presets`.

use std::path::PathBuf;

use orka_core::experiment::{run_experiment, Arm, ExperimentConfig, Preset};
use orka_core::sensing::{DitherLaw, NoiseConfig, SignalRole};

fn golden_path(preset: Preset) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{}.json", preset.name()))
}

#[test]
fn preset_plans_match_golden_files() {
    let update = std::env::var_os("ORKA_UPDATE_GOLDEN").is_some();
    for preset in Preset::ALL {
        let json = ExperimentConfig::preset(preset).plan().unwrap().to_json().unwrap();
        let path = golden_path(preset);
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &json).unwrap();
            continue;
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(json.trim_end(), golden.trim_end(), "{preset} plan drifted from {}", path.display());
    }
}

fn plan(preset: Preset) -> orka_core::experiment::Plan {
    ExperimentConfig::preset(preset).plan().unwrap()
}

fn sizes(p: &orka_core::experiment::Plan) -> Vec<(f64, usize, usize)> {
    p.points.iter().map(|pt| (pt.value, pt.n, pt.m)).collect()
}

#[test]
fn fig1_setup() {
    let p = plan(Preset::Fig1);
    assert_eq!(sizes(&p), vec![(40.0, 100, 40)]);
    assert_eq!(p.points[0].signal, SignalRole::Dense { d: 10 });
    assert_eq!(p.dither, DitherLaw::Gaussian { sigma: 1.0 });
    assert_eq!(p.trials, 100);
    assert_eq!(*p.checkpoints.last().unwrap(), 10_000);
}

#[test]
fn fig2_setups() {
    let a = plan(Preset::Fig2a);
    assert_eq!(a.points.iter().map(|pt| pt.m).collect::<Vec<_>>(), vec![1, 10, 20, 30]);
    assert_eq!(a.points[0].signal, SignalRole::LowRank { n1: 30, n2: 30, r: 2 });
    assert_eq!(a.arms, vec![Arm::RandomThresholds, Arm::AdaptiveThresholds]);
    let b = plan(Preset::Fig2b);
    assert_eq!(b.points[0].signal, SignalRole::Sparse { d: 100, s: 10 });
    assert_eq!(b.noise, NoiseConfig::Gaussian { sigma: 0.1 });
}

#[test]
fn fig3_row_counts() {
    // λ = 2^3..2^6 times n1·r = 60
    assert_eq!(sizes(&plan(Preset::Fig3a)).iter().map(|s| s.1).collect::<Vec<_>>(), vec![480, 960, 1920, 3840]);
    // β·n1·n2·r with n1 = n2 = 30, r = 1
    assert_eq!(sizes(&plan(Preset::Fig3b)).iter().map(|s| s.1).collect::<Vec<_>>(), vec![4500, 9000, 13500, 18000]);
}

#[test]
fn fig4_row_counts() {
    let a = plan(Preset::Fig4a);
    let dof = 15.0 * (100.0f64 / 15.0).ln();
    for (pt, os) in a.points.iter().zip([10.0, 50.0, 100.0, 200.0]) {
        assert_eq!(pt.n, (os * dof).round() as usize);
        assert_eq!(pt.signal, SignalRole::Sparse { d: 100, s: 15 });
    }
    let b = plan(Preset::Fig4b);
    assert_eq!(sizes(&b).iter().map(|s| s.1).collect::<Vec<_>>(), vec![1000, 1500, 2000, 2500]);
    assert_eq!(b.dither, DitherLaw::Zero);
    assert!(b.unit_norm);
}

#[test]
fn csv_is_sorted_with_round_trip_floats() {
    let mut cfg = ExperimentConfig::preset(Preset::Custom).with_trials(3).with_seed(5);
    cfg.overrides.sweep = Some(vec![2.0, 4.0]);
    let csv = run_experiment(&cfg, Some(2)).unwrap().to_csv(false);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "preset,arm,point,value,trial,nmse,iterations,status");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(usize, usize)> = rows.iter().map(|r| (r[2].parse().unwrap(), r[4].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &rows {
        let mantissa = r[5].split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{}", r[5]);
        let v: f64 = r[5].parse().unwrap();
        assert_eq!(format!("{v:.16e}"), r[5]);
        assert_eq!(r[7], "ok");
    }
}
