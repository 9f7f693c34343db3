// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Strong-error studies, order fits and empirical periodic measures.
//!
//! The weak comparison of two laws uses `min(W₁, 2)` on the empirical
//! marginals. It bounds the bounded-Lipschitz distance from above (that
//! test class is contained in the 1-Lipschitz functions and is bounded by
//! 1) and is exact to compute from sorted samples. For `m > 1` the maximum
//! over coordinates is reported, which is only a proxy.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{gather, Error, Result};
use crate::model::{self, InitialCondition, SdeProblem};
use crate::noise::WienerPath;
use crate::oracle::{exact_flow, exact_rps, LinearScalarProblem};
use crate::schemes::{self, fmt_f64, SchemeConfig, SchemeKind};

/// Disclosure attached to every weak-distance output.
pub const W1_PROXY_NOTE: &str = "W1 proxy: min(W1, 2) between empirical marginals, an upper bound \
     on the bounded-Lipschitz distance; for m > 1 the maximum over coordinates";

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub dt: f64,
    pub rmse: f64,
    pub n: usize,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "dt,rmse,n,stderr")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", fmt_f64(r.dt), fmt_f64(r.rmse), r.n, fmt_f64(r.stderr))?;
        }
        Ok(())
    }

    pub fn row(&self, dt: f64) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.dt == dt)
    }
}

/// What the scheme output is compared against.
#[derive(Debug, Clone)]
pub enum Truth {
    /// The exact random periodic solution, truncated to `[r - truncation, r]`.
    ExactRps { oracle: LinearScalarProblem, truncation: f64 },
    /// The exact flow from the same start `(-kτ, ξ)` as the scheme.
    ExactFlow { oracle: LinearScalarProblem },
    /// A fine run of a scheme from the same start, for problems without an
    /// oracle. `dt_ref` must be at most an eighth of the smallest step.
    Reference { kind: SchemeKind, dt_ref: f64 },
}

/// Shared parameters of strong and weak studies.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub dt_list: Vec<f64>,
    pub r: f64,
    /// Pull-back depth `k`: runs start at `-kτ`.
    pub depth: usize,
    pub dt_fine: f64,
    pub xi: InitialCondition,
    pub linear_in_fractional_step: bool,
}

/// Per-seed truth values and scheme values (`approx[i][s]` for `dt_list[i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSamples {
    pub seeds: Vec<u64>,
    pub truth: Vec<Vec<f64>>,
    pub approx: Vec<Vec<Vec<f64>>>,
}

struct Plan {
    schemes: Vec<SchemeConfig>,
    reference: Option<SchemeConfig>,
    t0: f64,
    t_min: f64,
    t_max: f64,
}

fn plan(problem: &SdeProblem, kind: SchemeKind, cfg: &StudyConfig, truth: &Truth) -> Result<Plan> {
    if cfg.dt_list.is_empty() {
        return Err(Error::Domain("empty step list".into()));
    }
    let mut sorted = cfg.dt_list.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted[0] <= 0.0 {
        return Err(Error::Domain("step sizes must be distinct and positive".into()));
    }
    if cfg.depth == 0 {
        return Err(Error::Domain("pull-back depth must be at least 1".into()));
    }
    let report = model::validate(problem)?;
    let schemes = cfg
        .dt_list
        .iter()
        .map(|&dt| {
            let s = SchemeConfig::new(kind, dt, cfg.dt_fine)?.with_linear_fractional_step(cfg.linear_in_fractional_step);
            s.check_stability(&report)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let t0 = -(cfg.depth as f64) * problem.tau;
    let mut t_min = t0;
    let reference = match truth {
        Truth::ExactRps { oracle, truncation } => {
            check_oracle(problem, oracle)?;
            t_min = t_min.min(cfg.r - truncation);
            None
        }
        Truth::ExactFlow { oracle } => {
            check_oracle(problem, oracle)?;
            None
        }
        Truth::Reference { kind, dt_ref } => {
            if *dt_ref > sorted[0] / 8.0 * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "reference step {dt_ref} exceeds min(dt)/8 = {}",
                    sorted[0] / 8.0
                )));
            }
            let s = SchemeConfig::new(*kind, *dt_ref, cfg.dt_fine)?
                .with_linear_fractional_step(cfg.linear_in_fractional_step);
            s.check_stability(&report)?;
            Some(s)
        }
    };
    Ok(Plan {
        schemes,
        reference,
        t0,
        t_min: t_min.min(0.0),
        t_max: cfg.r.max(0.0),
    })
}

fn check_oracle(problem: &SdeProblem, oracle: &LinearScalarProblem) -> Result<()> {
    if problem.state_dim != 1 || problem.noise_dim != 1 {
        return Err(Error::Domain("the exact oracle covers scalar problems only".into()));
    }
    if !oracle.is_dissipative() {
        return Err(Error::Domain(format!(
            "oracle needs a + c²/2 < 0, got a = {}, c = {}",
            oracle.a, oracle.c
        )));
    }
    Ok(())
}

fn truth_value(problem: &SdeProblem, cfg: &StudyConfig, truth: &Truth, plan: &Plan, path: &WienerPath) -> Result<Vec<f64>> {
    match truth {
        Truth::ExactRps { oracle, truncation } => Ok(vec![exact_rps(oracle, path, cfg.r, *truncation)?.value]),
        Truth::ExactFlow { oracle } => Ok(vec![exact_flow(oracle, path, plan.t0, cfg.r, cfg.xi.value_for(path)[0])?]),
        Truth::Reference { .. } => {
            let s = plan.reference.as_ref().expect("reference scheme planned");
            schemes::propagate(problem, s, path, plan.t0, cfg.r, &cfg.xi.value_for(path))
        }
    }
}

fn build_path(problem: &SdeProblem, cfg: &StudyConfig, plan: &Plan, seed: u64) -> Result<WienerPath> {
    WienerPath::build(seed, problem.noise_dim, cfg.dt_fine, 0.0, plan.t_min, plan.t_max)
}

/// Run the truth and every scheme on the same path per seed. Paths are
/// built inside the workers, so memory stays bounded by the thread count.
pub fn coupled_samples(
    problem: &SdeProblem,
    kind: SchemeKind,
    cfg: &StudyConfig,
    truth: &Truth,
    seeds: &[u64],
) -> Result<CoupledSamples> {
    let plan = plan(problem, kind, cfg, truth)?;
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let path = build_path(problem, cfg, &plan, seed)?;
            let xi = cfg.xi.value_for(&path);
            let t = truth_value(problem, cfg, truth, &plan, &path)?;
            let approx = plan
                .schemes
                .iter()
                .map(|s| schemes::propagate(problem, s, &path, plan.t0, cfg.r, &xi))
                .collect::<Result<Vec<_>>>()?;
            Ok((t, approx))
        })
        .collect::<Vec<_>>();
    let per_seed = gather(results, seeds.iter().copied())?;
    let mut truth_values = Vec::with_capacity(seeds.len());
    let mut approx = vec![Vec::with_capacity(seeds.len()); cfg.dt_list.len()];
    for (t, a) in per_seed {
        truth_values.push(t);
        for (i, v) in a.into_iter().enumerate() {
            approx[i].push(v);
        }
    }
    Ok(CoupledSamples {
        seeds: seeds.to_vec(),
        truth: truth_values,
        approx,
    })
}

/// Truth values alone, for the reference side of a weak comparison.
pub fn truth_samples(problem: &SdeProblem, cfg: &StudyConfig, truth: &Truth, seeds: &[u64]) -> Result<Vec<Vec<f64>>> {
    // Scheme kind is irrelevant here; planning still validates the problem.
    let plan = plan(problem, SchemeKind::EulerMaruyama, cfg, truth)?;
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let path = build_path(problem, cfg, &plan, seed)?;
            truth_value(problem, cfg, truth, &plan, &path)
        })
        .collect::<Vec<_>>();
    gather(results, seeds.iter().copied())
}

fn squared_errors(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect()
}

/// RMSE of per-sample squared errors and its jackknife standard error.
pub fn jackknife_rmse(sq: &[f64]) -> (f64, f64) {
    let n = sq.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let total: f64 = sq.iter().sum();
    let rmse = (total / n as f64).sqrt();
    if n == 1 {
        return (rmse, 0.0);
    }
    let loo: Vec<f64> = sq.iter().map(|e| ((total - e).max(0.0) / (n - 1) as f64).sqrt()).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (rmse, var.sqrt())
}

impl CoupledSamples {
    pub fn error_table(&self, dt_list: &[f64]) -> ErrorTable {
        let rows = dt_list
            .iter()
            .zip(&self.approx)
            .map(|(&dt, a)| {
                let (rmse, stderr) = jackknife_rmse(&squared_errors(a, &self.truth));
                ErrorRow {
                    dt,
                    rmse,
                    n: a.len(),
                    stderr,
                }
            })
            .collect();
        ErrorTable { rows }
    }
}

/// RMSE over seeds of the scheme value at `r` against the truth.
pub fn strong_error_study(
    problem: &SdeProblem,
    kind: SchemeKind,
    cfg: &StudyConfig,
    truth: &Truth,
    seeds: &[u64],
) -> Result<ErrorTable> {
    Ok(coupled_samples(problem, kind, cfg, truth, seeds)?.error_table(&cfg.dt_list))
}

/// Least-squares line through `(log dt, log rmse)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// 95% Student-t interval for the slope.
    pub slope_ci: [f64; 2],
}

pub fn fit_order(table: &ErrorTable) -> Result<OrderFit> {
    let n = table.rows.len();
    if n < 3 {
        return Err(Error::DegenerateFit(format!("{n} rows; at least 3 are needed")));
    }
    if let Some(r) = table.rows.iter().find(|r| !(r.rmse > 0.0 && r.rmse.is_finite())) {
        return Err(Error::DegenerateFit(format!("rmse {} at dt = {}", r.rmse, r.dt)));
    }
    let xs: Vec<f64> = table.rows.iter().map(|r| r.dt.ln()).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.rmse.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all step sizes equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        slope_ci: [slope - t * slope_stderr, slope + t * slope_stderr],
    })
}

/// Uniformly weighted samples with per-coordinate sorted copies.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<Vec<f64>>,
    sorted_marginals: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let m = samples.first().map(Vec::len).ok_or_else(|| Error::Domain("no samples".into()))?;
        if m == 0 || samples.iter().any(|s| s.len() != m) {
            return Err(Error::Domain("samples must share a positive dimension".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        let sorted_marginals = (0..m)
            .map(|j| {
                let mut c: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        Ok(EmpiricalMeasure {
            samples,
            sorted_marginals,
        })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|v| vec![*v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sorted_marginals.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn sorted_marginal(&self, coord: usize) -> &[f64] {
        &self.sorted_marginals[coord]
    }

    /// Marginal CDF `P(X_coord ≤ x)`.
    pub fn cdf(&self, coord: usize, x: f64) -> f64 {
        let s = &self.sorted_marginals[coord];
        s.partition_point(|v| *v <= x) as f64 / s.len() as f64
    }
}

/// `∫ |F_a - F_b| dx` for sorted samples of arbitrary sizes.
pub fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut x = f64::NEG_INFINITY;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(u), Some(v)) => u.min(*v),
            (Some(u), None) => *u,
            (None, Some(v)) => *v,
            (None, None) => unreachable!(),
        };
        if x.is_finite() {
            total += (i as f64 / n - j as f64 / m).abs() * (next - x);
        }
        x = next;
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
    }
    total
}

/// `min(W₁, 2)` between marginals, maximised over coordinates.
pub fn weak_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            mu.dim(),
            nu.dim()
        )));
    }
    Ok((0..mu.dim())
        .map(|j| wasserstein1_sorted(mu.sorted_marginal(j), nu.sorted_marginal(j)))
        .fold(0.0, f64::max)
        .min(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub stderr: f64,
    /// Basic (pivotal) 95% interval `[2d - q97.5, 2d - q2.5]`, floored at 0.
    /// Resampled distances are biased upward, so percentile intervals tend
    /// to miss the point estimate.
    pub ci: [f64; 2],
}

/// Resample both sample sets with replacement and recompute the distance.
pub fn bootstrap_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, resamples: usize, seed: u64) -> Result<Bootstrap> {
    if resamples < 2 {
        return Err(Error::Domain("at least two bootstrap resamples are needed".into()));
    }
    let estimate = weak_distance(mu, nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |m: &EmpiricalMeasure, rng: &mut ChaCha8Rng| {
        let n = m.len();
        EmpiricalMeasure::new((0..n).map(|_| m.samples()[rng.random_range(0..n)].clone()).collect())
    };
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let a = draw(mu, &mut rng)?;
        let b = draw(nu, &mut rng)?;
        stats.push(weak_distance(&a, &b)?);
    }
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let stderr = (stats.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    stats.sort_by(f64::total_cmp);
    let pick = |q: f64| stats[((q * (n - 1.0)).round() as usize).min(stats.len() - 1)];
    Ok(Bootstrap {
        stderr,
        ci: [(2.0 * estimate - pick(0.975)).max(0.0), 2.0 * estimate - pick(0.025)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub dt: f64,
    pub distance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub boot_stderr: f64,
    /// RMSE of the scheme against the truth on the scheme's own seeds.
    pub strong_rmse: f64,
    pub strong_stderr: f64,
    pub n: usize,
}

pub fn write_measure_csv<W: Write>(rows: &[MeasureRow], mut w: W) -> io::Result<()> {
    writeln!(w, "dt,distance,ci_low,ci_high,boot_stderr,strong_rmse,strong_stderr,n")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.dt),
            fmt_f64(r.distance),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            fmt_f64(r.boot_stderr),
            fmt_f64(r.strong_rmse),
            fmt_f64(r.strong_stderr),
            r.n
        )?;
    }
    Ok(())
}

/// Seeds and resampling for [`periodic_measure_convergence`].
#[derive(Debug, Clone)]
pub struct MeasureConfig {
    pub n_samples: usize,
    /// Scheme samples use seeds `base_seed..base_seed+n`, truth samples the
    /// next `n` seeds, so the two measures are independent.
    pub base_seed: u64,
    pub resamples: usize,
    pub bootstrap_seed: u64,
}

/// Weak distance between the scheme's law at `r` and the truth's law,
/// estimated from independent seed sets, per step size.
pub fn periodic_measure_convergence(
    problem: &SdeProblem,
    kind: SchemeKind,
    cfg: &StudyConfig,
    truth: &Truth,
    mc: &MeasureConfig,
) -> Result<Vec<MeasureRow>> {
    if mc.n_samples == 0 {
        return Err(Error::Domain("no samples requested".into()));
    }
    let n = mc.n_samples as u64;
    let scheme_seeds: Vec<u64> = (mc.base_seed..mc.base_seed + n).collect();
    let truth_seeds: Vec<u64> = (mc.base_seed + n..mc.base_seed + 2 * n).collect();
    let coupled = coupled_samples(problem, kind, cfg, truth, &scheme_seeds)?;
    let truth_measure = EmpiricalMeasure::new(truth_samples(problem, cfg, truth, &truth_seeds)?)?;
    let strong = coupled.error_table(&cfg.dt_list);
    cfg.dt_list
        .iter()
        .zip(&coupled.approx)
        .zip(&strong.rows)
        .map(|((&dt, values), row)| {
            let approx = EmpiricalMeasure::new(values.clone())?;
            let distance = weak_distance(&approx, &truth_measure)?;
            let boot = bootstrap_distance(&approx, &truth_measure, mc.resamples, mc.bootstrap_seed)?;
            Ok(MeasureRow {
                dt,
                distance,
                ci_low: boot.ci[0],
                ci_high: boot.ci[1],
                boot_stderr: boot.stderr,
                strong_rmse: row.rmse,
                strong_stderr: row.stderr,
                n: mc.n_samples,
            })
        })
        .collect()
}
