// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use proptest::prelude::*;
use rpsim_core::model::builtin;
use rpsim_core::pullback::{periodicity_diagnostic, pullback_rps, shifted_pair, PairWindow};
use rpsim_core::{InitialCondition, SchemeConfig, SchemeKind, WienerPath};

fn paths(n: u64, t_min: f64, t_max: f64) -> Vec<WienerPath> {
    (0..n).map(|s| WienerPath::build(s, 1, 0.01, 0.0, t_min, t_max).unwrap()).collect()
}

#[test]
fn converges_within_tolerance_and_reports_depth() {
    let p = builtin::example1();
    let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
    let res = pullback_rps(&p, &s, &paths(200, -10.0, 0.0), 0.0, 5, 1e-3, &InitialCondition::fixed(vec![0.5])).unwrap();
    assert!(res.converged);
    assert!(res.k_used <= 3, "k_used {}", res.k_used);
    assert_eq!(res.values.len(), 200);
    assert!(*res.cauchy_gaps.last().unwrap() < 1e-3);
}

#[test]
fn gap_decay_follows_the_l2_rate() {
    let p = builtin::example1();
    let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
    let res = pullback_rps(&p, &s, &paths(500, -10.0, 0.0), 0.0, 5, 0.0, &InitialCondition::fixed(vec![0.5])).unwrap();
    let rate = res.decay_ratio().unwrap();
    let expect = (2.0 * (0.5 - PI)).exp();
    assert!(rate < 2.0 * expect && rate > 0.1 * expect, "rate {rate}, expect {expect}");
}

#[test]
fn noiseless_pullback_matches_periodic_solution() {
    let p = builtin::linear_scalar(-PI, 0.0, 1.0, 2.0);
    let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 1e-3, 1e-3).unwrap();
    let path = WienerPath::build(0, 1, 1e-3, 0.0, -8.0, 0.5).unwrap();
    let res = pullback_rps(&p, &s, &[path], 0.5, 4, 1e-9, &InitialCondition::fixed(vec![2.0])).unwrap();
    let expect = (-(-PI) * (PI * 0.5).sin() - PI * (PI * 0.5).cos()) / (2.0 * PI * PI);
    // Euler on a smooth ODE: first order in dt.
    assert!((res.values[0][0] - expect).abs() < 5e-3, "{} vs {expect}", res.values[0][0]);
}

#[test]
fn diagnostic_series_is_periodic() {
    let p = builtin::example1();
    let s = SchemeConfig::new(SchemeKind::ModifiedMilstein, 0.01, 0.01).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.04).collect();
    let series = periodicity_diagnostic(&p, &s, &paths(5, -10.0, 0.0), &grid, 3, &InitialCondition::fixed(vec![0.5])).unwrap();
    for sr in &series {
        assert!(sr.periodicity_defect(p.tau) < 1e-5);
        assert!(sr.values.iter().any(|v| v.abs() > 1e-3));
    }
}

#[test]
fn diagnostic_needs_enough_noise() {
    let p = builtin::example1();
    let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
    let grid = [0.0, 1.0];
    let short = paths(1, -6.0, 0.0);
    assert!(periodicity_diagnostic(&p, &s, &short, &grid, 3, &InitialCondition::fixed(vec![0.5])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shifted_pair_defect_decays_after_transient(seed in 0u64..1000) {
        let p = builtin::example1();
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let path = WienerPath::build(seed, 1, 0.01, 0.0, -10.0, 0.0).unwrap();
        let w = PairWindow { start: -6.0, end: 0.0, compare_from: 0.0 };
        let pair = shifted_pair(&p, &s, &path, w, &[0.5]).unwrap();
        prop_assert!(pair.max_defect < 1e-3, "defect {}", pair.max_defect);
        let early = PairWindow { compare_from: -4.0, ..w };
        let loose = shifted_pair(&p, &s, &path, early, &[0.5]).unwrap();
        prop_assert!(loose.max_defect >= pair.max_defect);
    }
}
