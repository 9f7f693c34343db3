// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Pull-back approximation of the random periodic solution.
//!
//! For increasing depths `k` each seed is integrated from `-kτ` to the
//! target time `r` with a fresh run; the L² Cauchy gap between depths `k`
//! and `k+1` is estimated by the ensemble RMS of pathwise differences (same
//! `ω` at both depths). Ensembles run in parallel over seeds and are
//! reduced in seed order, so results do not depend on the thread count.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{gather, Error, Result};
use crate::model::{InitialCondition, SdeProblem};
use crate::noise::WienerPath;
use crate::schemes::{self, fmt_f64, SchemeConfig, Trajectory};

/// Approximated random periodic values at one target time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    pub r: f64,
    pub dt: f64,
    pub k_used: usize,
    pub converged: bool,
    /// `cauchy_gaps[k-1]` is the RMS of `X_r^{-kτ} - X_r^{-(k+1)τ}`.
    pub cauchy_gaps: Vec<f64>,
    /// Per-seed state at depth `k_used`.
    pub values: Vec<Vec<f64>>,
}

impl PullbackResult {
    /// Per-period decay of the Cauchy gaps, fitted geometrically after
    /// dropping the first gap. `None` with fewer than two usable gaps.
    pub fn decay_ratio(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .cauchy_gaps
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, g)| **g > 0.0)
            .map(|(i, g)| ((i + 1) as f64, g.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some((sxy / sxx).exp())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Ensemble RMS of `|a_i - b_i|`, reduced in index order.
pub fn ensemble_rms(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .sum();
    (ss / a.len() as f64).sqrt()
}

/// Integrate every path from `-kτ` to `r`.
pub fn values_at_depth(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    paths: &[WienerPath],
    r: f64,
    k: usize,
    xi: &InitialCondition,
) -> Result<Vec<Vec<f64>>> {
    let t0 = -(k as f64) * problem.tau;
    let results = paths
        .par_iter()
        .map(|p| {
            schemes::propagate(problem, scheme, p, t0, r, &xi.value_for(p))
                .map_err(|e| annotate_depth(e, k))
        })
        .collect::<Vec<_>>();
    gather(results, paths.iter().map(|p| p.seed()))
}

fn annotate_depth(e: Error, k: usize) -> Error {
    match e {
        Error::Divergence { .. } => e,
        Error::GridAlignment(msg) => Error::GridAlignment(format!("{msg} (pull-back depth k = {k})")),
        other => other,
    }
}

fn check_preconditions(problem: &SdeProblem, scheme: &SchemeConfig, r: f64) -> Result<()> {
    let report = crate::model::validate(problem)?;
    scheme.check_stability(&report)?;
    scheme.check_period(problem.tau)?;
    if r < 0.0 {
        return Err(Error::Domain(format!("target time r = {r} must be nonnegative")));
    }
    Ok(())
}

/// Deepen the pull-back one period at a time until the Cauchy gap drops
/// below `tol` or depth `k_max` is reached.
pub fn pullback_rps(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    paths: &[WienerPath],
    r: f64,
    k_max: usize,
    tol: f64,
    xi: &InitialCondition,
) -> Result<PullbackResult> {
    check_preconditions(problem, scheme, r)?;
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let mut values = values_at_depth(problem, scheme, paths, r, 1, xi)?;
    let mut gaps = Vec::new();
    let mut k_used = 1;
    let mut converged = false;
    while k_used < k_max {
        let deeper = values_at_depth(problem, scheme, paths, r, k_used + 1, xi)?;
        let gap = ensemble_rms(&values, &deeper);
        gaps.push(gap);
        values = deeper;
        k_used += 1;
        if gap < tol {
            converged = true;
            break;
        }
    }
    Ok(PullbackResult {
        r,
        dt: scheme.dt,
        k_used,
        converged,
        cauchy_gaps: gaps,
        values,
    })
}

/// One diagnostic series per seed: `t ↦ X*_t(θ_{-t} ω)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSeries {
    pub seed: u64,
    pub times: Vec<f64>,
    /// First state coordinate at each time.
    pub values: Vec<f64>,
}

impl DiagnosticSeries {
    /// `max |series(t+τ) - series(t)|` over times where both are present.
    pub fn periodicity_defect(&self, tau: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, t) in self.times.iter().enumerate() {
            let target = t + tau;
            let tol = 1e-9 * target.abs().max(1.0);
            if let Some(j) = self.times.iter().position(|s| (s - target).abs() <= tol) {
                worst = worst.max((self.values[j] - self.values[i]).abs());
            }
        }
        worst
    }
}

/// For each `t` in `t_grid`, the depth-`k` pull-back value at time `t` on
/// the shifted path `θ_{-t} ω`. The result is `τ`-periodic up to the
/// pull-back truncation error.
pub fn periodicity_diagnostic(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    paths: &[WienerPath],
    t_grid: &[f64],
    k: usize,
    xi: &InitialCondition,
) -> Result<Vec<DiagnosticSeries>> {
    check_preconditions(problem, scheme, 0.0)?;
    let t0 = -(k as f64) * problem.tau;
    let results = paths
        .par_iter()
        .map(|p| {
            let mut values = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let shifted = p.shift_by_time(-t)?;
                if shifted.t_min() > t0 + 1e-9 || shifted.t_max() < t - 1e-9 {
                    return Err(Error::Extent(format!(
                        "diagnostic at t = {t} needs noise on [{}, 0] relative to the path anchor",
                        t0 - t
                    )));
                }
                let x = schemes::propagate(problem, scheme, &shifted, t0, t, &xi.value_for(p))?;
                values.push(x[0]);
            }
            Ok(DiagnosticSeries {
                seed: p.seed(),
                times: t_grid.to_vec(),
                values,
            })
        })
        .collect::<Vec<_>>();
    gather(results, paths.iter().map(|p| p.seed()))
}

/// Write diagnostic series as `t,value,seed`.
pub fn write_series_csv<W: Write>(series: &[DiagnosticSeries], mut w: W) -> io::Result<()> {
    writeln!(w, "t,value,seed")?;
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(*v), s.seed)?;
        }
    }
    Ok(())
}

/// Window for the shifted-pair comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWindow {
    /// Pull-back start of both runs, e.g. `-6`.
    pub start: f64,
    /// End of the unshifted run, e.g. `0`; the shifted run ends `τ` later.
    pub end: f64,
    /// Compare `X*_t(θ_{-τ} ω)` with `X*_{t-τ}(ω)` for `t ≥ compare_from`.
    pub compare_from: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftedPair {
    pub unshifted: Trajectory,
    pub shifted: Trajectory,
    /// Max over the comparison window of `|X*_t(θ_{-τ} ω) - X*_{t-τ}(ω)|`.
    pub max_defect: f64,
}

/// The same start value run on `ω` and on `θ_{-τ} ω`. After the pull-back
/// transient the second trajectory repeats the first with a delay of `τ`.
pub fn shifted_pair(problem: &SdeProblem, scheme: &SchemeConfig, path: &WienerPath, window: PairWindow, xi: &[f64]) -> Result<ShiftedPair> {
    check_preconditions(problem, scheme, 0.0)?;
    let tau = problem.tau;
    let shifted_path = path.shift_by_time(-tau)?;
    for (p, lo, hi) in [
        (path, window.start, window.end),
        (&shifted_path, window.start, window.end + tau),
    ] {
        if p.t_min() > lo + 1e-9 || p.t_max() < hi - 1e-9 {
            return Err(Error::Extent(format!(
                "window [{lo}, {hi}] exceeds the path extent [{}, {}]",
                p.t_min(),
                p.t_max()
            )));
        }
    }
    let unshifted = schemes::integrate(problem, scheme, path, window.start, window.end, xi)?;
    let shifted = schemes::integrate(problem, scheme, &shifted_path, window.start, window.end + tau, xi)?;
    let mut max_defect: f64 = 0.0;
    for (i, t) in shifted.times.iter().enumerate() {
        if *t < window.compare_from - 1e-9 {
            continue;
        }
        if let Some(j) = unshifted.index_of(t - tau) {
            for (a, b) in shifted.state(i).iter().zip(unshifted.state(j)) {
                max_defect = max_defect.max((a - b).abs());
            }
        }
    }
    Ok(ShiftedPair {
        unshifted,
        shifted,
        max_defect,
    })
}

/// Write the pair as `t,trajectory,value` with `trajectory` either `omega`
/// or `shifted`.
pub fn write_pair_csv<W: Write>(pair: &ShiftedPair, mut w: W) -> io::Result<()> {
    writeln!(w, "t,trajectory,value")?;
    for (label, traj) in [("omega", &pair.unshifted), ("shifted", &pair.shifted)] {
        for (i, t) in traj.times.iter().enumerate() {
            writeln!(w, "{},{label},{}", fmt_f64(*t), fmt_f64(traj.state(i)[0]))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::model::builtin;
    use crate::schemes::SchemeKind;

    fn paths(n: u64, t_min: f64, t_max: f64, dt_fine: f64) -> Vec<WienerPath> {
        (0..n)
            .map(|s| WienerPath::build(s, 1, dt_fine, 0.0, t_min, t_max).unwrap())
            .collect()
    }

    #[test]
    fn example_one_converges_by_depth_three() {
        let p = builtin::example1();
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let ps = paths(200, -6.0, 0.0, 0.01);
        let res = pullback_rps(&p, &s, &ps, 0.0, 3, 1e-3, &InitialCondition::fixed(vec![0.5])).unwrap();
        assert!(res.converged);
        assert!(res.k_used <= 3);
        assert_eq!(res.values.len(), 200);
    }

    #[test]
    fn pure_linear_gaps_decay_by_propagator_power() {
        let mut p = builtin::example1();
        p.drift = Arc::new(|_, _, o| o.fill(0.0));
        p.diffusion = Arc::new(|_, _, o| o.fill(0.0));
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let ps = paths(3, -10.0, 0.0, 0.01);
        let res = pullback_rps(&p, &s, &ps, 0.0, 5, 0.0, &InitialCondition::fixed(vec![1.0])).unwrap();
        assert!(!res.converged);
        assert_eq!(res.cauchy_gaps.len(), 4);
        let q = (1.0 - PI * 0.01f64).powi(200);
        for w in res.cauchy_gaps.windows(2) {
            assert!((w[1] / w[0] / q - 1.0).abs() < 1e-9);
        }
        assert!((res.decay_ratio().unwrap() / q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagnostic_at_zero_is_plain_pullback() {
        let p = builtin::example1();
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let ps = paths(4, -6.0, 0.0, 0.01);
        let xi = InitialCondition::fixed(vec![0.5]);
        let series = periodicity_diagnostic(&p, &s, &ps, &[0.0], 3, &xi).unwrap();
        let direct = values_at_depth(&p, &s, &ps, 0.0, 3, &xi).unwrap();
        for (ser, v) in series.iter().zip(&direct) {
            assert_eq!(ser.values[0], v[0]);
        }
    }

    #[test]
    fn diagnostic_extent_error() {
        let p = builtin::example1();
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let ps = paths(1, -6.0, 0.0, 0.01);
        let xi = InitialCondition::fixed(vec![0.5]);
        assert!(matches!(
            periodicity_diagnostic(&p, &s, &ps, &[1.0], 3, &xi),
            Err(Error::Extent(_))
        ));
    }

    #[test]
    fn pair_for_pure_linear_problem_is_exact_delay() {
        let mut p = builtin::example1();
        p.drift = Arc::new(|_, _, o| o.fill(0.0));
        p.diffusion = Arc::new(|_, _, o| o.fill(0.0));
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let path = WienerPath::build(0, 1, 0.01, 0.0, -8.0, 0.0).unwrap();
        let w = PairWindow {
            start: -6.0,
            end: 0.0,
            compare_from: -1.0,
        };
        let pair = shifted_pair(&p, &s, &path, w, &[0.5]).unwrap();
        // both runs start at -6 from 0.5; they differ only by the transient
        let q = 1.0 - 0.01 * PI;
        let expected = 0.5 * q.powi(300) * (1.0 - q.powi(200));
        assert!((pair.max_defect - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn pair_window_outside_extent() {
        let p = builtin::example1();
        let s = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.01, 0.01).unwrap();
        let path = WienerPath::build(0, 1, 0.01, 0.0, -6.0, 0.0).unwrap();
        let w = PairWindow {
            start: -6.0,
            end: 0.0,
            compare_from: -1.0,
        };
        assert!(matches!(shifted_pair(&p, &s, &path, w, &[0.5]), Err(Error::Extent(_))));
    }

    #[test]
    fn json_fields() {
        let r = PullbackResult {
            r: 0.0,
            dt: 0.01,
            k_used: 3,
            converged: true,
            cauchy_gaps: vec![1e-2, 1e-5],
            values: vec![vec![0.25]],
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["r", "dt", "k_used", "converged", "cauchy_gaps", "values"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
