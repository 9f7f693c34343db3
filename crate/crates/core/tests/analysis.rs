// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use rpsim_core::analysis::{
    bootstrap_distance, fit_order, jackknife_rmse, wasserstein1_sorted, weak_distance, EmpiricalMeasure, ErrorRow,
    ErrorTable,
};
use rpsim_core::WienerPath;
use statrs::distribution::{ContinuousCDF, Normal};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Optimal assignment cost by enumerating permutations.
fn assignment_w1(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(a, b, used, i + 1, acc + (a[i] - b[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}

/// `∫₀¹ |F_a⁻¹(u) - F_b⁻¹(u)| du` over the merged quantile breakpoints.
fn quantile_w1(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len(), b.len());
    let mut breaks: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    breaks.extend((0..=m).map(|j| j as f64 / m as f64));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let q = |s: &[f64], u: f64| s[((u * s.len() as f64).floor() as usize).min(s.len() - 1)];
    breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (q(&a, mid) - q(&b, mid)).abs() * (w[1] - w[0])
        })
        .sum()
}

fn measure(v: &[f64]) -> EmpiricalMeasure {
    EmpiricalMeasure::from_scalars(v).unwrap()
}

#[test]
fn w1_known_values() {
    assert_eq!(wasserstein1_sorted(&[0.0], &[0.5]), 0.5);
    assert_eq!(wasserstein1_sorted(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
    assert!((wasserstein1_sorted(&[0.0, 1.0], &[0.5]) - 0.5).abs() < 1e-15);
    // Capped at 2 in the weak distance.
    assert_eq!(weak_distance(&measure(&[0.0]), &measure(&[10.0])).unwrap(), 2.0);
}

#[test]
fn empirical_cdf_within_dkw_band() {
    let dt = 0.01;
    let path = WienerPath::build(17, 1, dt, 0.0, 0.0, 50.0).unwrap();
    let z: Vec<f64> = path.increments().iter().map(|x| x / dt.sqrt()).collect();
    let n = z.len() as f64;
    let mu = measure(&z);
    let alpha: f64 = 1e-3;
    let eps = ((2.0 / alpha).ln() / (2.0 * n)).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let worst = mu
        .sorted_marginal(0)
        .iter()
        .map(|&x| (mu.cdf(0, x) - normal.cdf(x)).abs().max((mu.cdf(0, x) - 1.0 / n - normal.cdf(x)).abs()))
        .fold(0.0, f64::max);
    assert!(worst < eps, "sup |F_n - Φ| = {worst}, band {eps}");
}

#[test]
fn w1_between_normal_samples_shrinks_with_n() {
    let dt = 1.0;
    let draw = |seed: u64, n: usize| {
        WienerPath::build(seed, 1, dt, 0.0, 0.0, n as f64).unwrap().increments().to_vec()
    };
    let small = weak_distance(&measure(&draw(1, 400)), &measure(&draw(2, 400))).unwrap();
    let large = weak_distance(&measure(&draw(3, 40_000)), &measure(&draw(4, 40_000))).unwrap();
    assert!(large < small);
    assert!(large < 0.03, "{large}");
}

#[test]
fn multivariate_distance_is_worst_marginal() {
    let a = EmpiricalMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let b = EmpiricalMeasure::new(vec![vec![0.0, 0.3], vec![1.0, 0.3]]).unwrap();
    assert!((weak_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn bootstrap_is_reproducible_and_covers_estimate() {
    let a: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = (0..300).map(|i| (i as f64 * 0.41).sin() + 0.1).collect();
    let (ma, mb) = (measure(&a), measure(&b));
    let x = bootstrap_distance(&ma, &mb, 200, 5).unwrap();
    assert_eq!(x, bootstrap_distance(&ma, &mb, 200, 5).unwrap());
    assert_ne!(x, bootstrap_distance(&ma, &mb, 200, 6).unwrap());
    let d = weak_distance(&ma, &mb).unwrap();
    assert!(x.ci[0] <= d && d <= x.ci[1]);
    assert!(x.stderr > 0.0);
}

fn table(points: &[(f64, f64)]) -> ErrorTable {
    ErrorTable {
        rows: points
            .iter()
            .map(|&(dt, rmse)| ErrorRow {
                dt,
                rmse,
                n: 10,
                stderr: 0.0,
            })
            .collect(),
    }
}

#[test]
fn fit_needs_three_positive_rows() {
    assert!(fit_order(&table(&[(1e-3, 1e-2), (2e-3, 2e-2)])).is_err());
    assert!(fit_order(&table(&[(1e-3, 1e-2), (2e-3, 0.0), (4e-3, 3e-2)])).is_err());
    assert!(fit_order(&table(&[(1e-3, 1e-2), (1e-3, 2e-2), (1e-3, 3e-2)])).is_err());
}

#[test]
fn fit_ci_contains_slope_and_widens_with_noise() {
    let dts: [f64; 5] = [1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2];
    let clean = fit_order(&table(&dts.map(|d| (d, d.sqrt())))).unwrap();
    let noisy_pts: Vec<(f64, f64)> = dts
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, d.sqrt() * if i % 2 == 0 { 1.2 } else { 0.85 }))
        .collect();
    let noisy = fit_order(&table(&noisy_pts)).unwrap();
    assert!(noisy.slope_ci[0] <= noisy.slope && noisy.slope <= noisy.slope_ci[1]);
    assert!(noisy.slope_ci[1] - noisy.slope_ci[0] > clean.slope_ci[1] - clean.slope_ci[0]);
    assert!(noisy.r_squared < clean.r_squared);
}

#[test]
fn jackknife_matches_direct_leave_one_out() {
    let sq = [0.1, 0.4, 0.2, 0.9, 0.05, 0.3];
    let (rmse, se) = jackknife_rmse(&sq);
    let n = sq.len() as f64;
    assert!((rmse - (sq.iter().sum::<f64>() / n).sqrt()).abs() < 1e-15);
    let loo: Vec<f64> = (0..sq.len())
        .map(|i| {
            let rest: Vec<f64> = sq.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            (rest.iter().sum::<f64>() / rest.len() as f64).sqrt()
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let expect = ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
    assert!((se - expect).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_equals_optimal_assignment(a in prop::collection::vec(-3.0f64..3.0, 1..7), shift in -1.0f64..1.0, seed in 0u64..100) {
        let n = a.len();
        let b: Vec<f64> = (0..n).map(|i| ((i as f64 + seed as f64) * 1.7).sin() * 2.0 + shift).collect();
        let fast = wasserstein1_sorted(&sorted(&a), &sorted(&b));
        prop_assert!((fast - assignment_w1(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn w1_equals_quantile_integral(a in prop::collection::vec(-3.0f64..3.0, 1..30), b in prop::collection::vec(-3.0f64..3.0, 1..30)) {
        let fast = wasserstein1_sorted(&sorted(&a), &sorted(&b));
        prop_assert!((fast - quantile_w1(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn weak_distance_is_a_metric(
        a in prop::collection::vec(-2.0f64..2.0, 1..25),
        b in prop::collection::vec(-2.0f64..2.0, 1..25),
        c in prop::collection::vec(-2.0f64..2.0, 1..25),
    ) {
        let (ma, mb, mc) = (measure(&a), measure(&b), measure(&c));
        let ab = weak_distance(&ma, &mb).unwrap();
        prop_assert_eq!(weak_distance(&ma, &ma).unwrap(), 0.0);
        prop_assert!((ab - weak_distance(&mb, &ma).unwrap()).abs() < 1e-14);
        prop_assert!(ab >= 0.0 && ab <= 2.0);
        let via = weak_distance(&ma, &mc).unwrap() + weak_distance(&mc, &mb).unwrap();
        prop_assert!(ab <= via + 1e-12);
    }

    #[test]
    fn translation_moves_w1_by_the_shift(a in prop::collection::vec(-2.0f64..2.0, 1..25), s in -1.5f64..1.5) {
        let b: Vec<f64> = a.iter().map(|x| x + s).collect();
        let d = weak_distance(&measure(&a), &measure(&b)).unwrap();
        prop_assert!((d - s.abs()).abs() < 1e-12);
    }

    #[test]
    fn fit_is_invariant_under_rescaling(
        p in 0.2f64..2.0,
        c in 0.01f64..100.0,
        k in 0.1f64..10.0,
        wobble in prop::collection::vec(0.8f64..1.25, 4),
    ) {
        let dts: [f64; 4] = [1e-3, 2e-3, 4e-3, 8e-3];
        let base: Vec<(f64, f64)> = dts.iter().zip(&wobble).map(|(&d, w)| (d, c * d.powf(p) * w)).collect();
        let f = fit_order(&table(&base)).unwrap();
        // Scaling the errors leaves the slope; scaling dt moves only the intercept.
        let scaled_err: Vec<(f64, f64)> = base.iter().map(|&(d, e)| (d, e * k)).collect();
        let scaled_dt: Vec<(f64, f64)> = base.iter().map(|&(d, e)| (d * k, e)).collect();
        let g = fit_order(&table(&scaled_err)).unwrap();
        let h = fit_order(&table(&scaled_dt)).unwrap();
        prop_assert!((f.slope - g.slope).abs() < 1e-10);
        prop_assert!((f.slope - h.slope).abs() < 1e-10);
        prop_assert!((g.intercept - f.intercept - k.ln()).abs() < 1e-9);
        prop_assert!((h.intercept - f.intercept + f.slope * k.ln()).abs() < 1e-9);
        prop_assert!((f.r_squared - g.r_squared).abs() < 1e-10);
        if wobble.iter().all(|w| *w == 1.0) {
            prop_assert!((f.slope - p).abs() < 1e-10);
        }
    }
}
