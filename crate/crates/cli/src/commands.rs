// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rpsim_core::analysis::{self, MeasureConfig, StudyConfig, Truth, W1_PROXY_NOTE};
use rpsim_core::floquet::{self, FloquetData};
use rpsim_core::model::{self, ConditionReport};
use rpsim_core::pullback::{self, PairWindow, PullbackResult};
use rpsim_core::schemes::{self, SchemeConfig};
use rpsim_core::{Error, InitialCondition, SdeProblem, WienerPath};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Order assertion for `converge`.
#[derive(Debug, Clone, Copy)]
pub struct OrderAssertion {
    pub order: f64,
    pub band: f64,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_with(out: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = create(out, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json(out: &Path, name: &str, v: &Value) -> Result<(), CliError> {
    write_with(out, name, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        writeln!(w)
    })
}

fn summary(command: &str, cfg: &RunConfig, problem: &SdeProblem, seeds: &[u64]) -> Value {
    json!({
        "command": command,
        "problem": problem.name,
        "config": cfg,
        "n_seeds": seeds.len(),
        "first_seed": seeds.first(),
        "proxy_metrics": W1_PROXY_NOTE,
    })
}

fn report_json(report: &ConditionReport) -> Value {
    serde_json::to_value(report).expect("report serialises")
}

/// Build one path per seed, in parallel, keeping the first error in seed order.
fn build_paths(seeds: &[u64], dim: usize, dt_fine: f64, t_min: f64, t_max: f64) -> Result<Vec<WienerPath>, CliError> {
    let built: Vec<_> = seeds
        .par_iter()
        .map(|&s| WienerPath::build(s, dim, dt_fine, 0.0, t_min, t_max))
        .collect();
    Ok(built.into_iter().collect::<Result<Vec<_>, _>>()?)
}

fn nonempty(seeds: Vec<u64>) -> Result<Vec<u64>, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("no seeds configured".into()));
    }
    Ok(seeds)
}

/// Scheme for single-step-size commands, with every alignment rule checked.
fn scheme_for(cfg: &RunConfig, problem: &SdeProblem, report: &ConditionReport, dt_fine: f64) -> Result<SchemeConfig, CliError> {
    let scheme = SchemeConfig::new(cfg.scheme, cfg.dt, dt_fine)?.with_linear_fractional_step(cfg.linear_in_fractional_step);
    scheme.check_period(problem.tau)?;
    scheme.check_stability(report)?;
    if !(cfg.r >= 0.0) {
        return Err(CliError::Config(format!("r = {} must be nonnegative", cfg.r)));
    }
    if cfg.k_max == 0 {
        return Err(CliError::Config("k_max must be at least 1".into()));
    }
    Ok(scheme)
}

pub fn simulate(cfg: &RunConfig, out: &Path, seed_offset: u64) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let report = model::validate(&problem)?;
    let dt_fine = cfg.dt_fine.unwrap_or(cfg.dt);
    let scheme = scheme_for(cfg, &problem, &report, dt_fine)?;
    let xi = InitialCondition::fixed(cfg.xi(problem.state_dim)?);
    let seeds = nonempty(cfg.seeds(seed_offset))?;

    let t_min = cfg.path_start.unwrap_or(-(cfg.k_max as f64) * problem.tau);
    let paths = build_paths(&seeds, problem.noise_dim, dt_fine, t_min, cfg.r.max(0.0))?;
    let result = pullback::pullback_rps(&problem, &scheme, &paths, cfg.r, cfg.k_max, cfg.tol, &xi)?;
    let t0 = -(result.k_used as f64) * problem.tau;
    let traj = schemes::integrate(&problem, &scheme, &paths[0], t0, cfg.r, &xi.value_for(&paths[0]))?;

    write_with(out, "trajectory.csv", |w| traj.write_csv(w))?;
    write_json(out, "pullback.json", &serde_json::to_value(&result).expect("serialises"))?;
    let mut s = summary("simulate", cfg, &problem, &seeds);
    s["conditions"] = report_json(&report);
    s["k_used"] = json!(result.k_used);
    s["converged"] = json!(result.converged);
    s["decay_ratio"] = json!(result.decay_ratio());
    write_json(out, "summary.json", &s)
}

fn truth_for(cfg: &RunConfig, problem: &SdeProblem) -> Result<(Truth, Value), CliError> {
    if let Some(oracle) = cfg.oracle() {
        let desc = json!({"kind": "exact", "truncation": cfg.truncation});
        return Ok((
            Truth::ExactRps {
                oracle,
                truncation: cfg.truncation,
            },
            desc,
        ));
    }
    match cfg.reference_dt {
        Some(dt_ref) => Ok((
            Truth::Reference {
                kind: cfg.reference_scheme,
                dt_ref,
            },
            json!({"kind": "reference", "scheme": cfg.reference_scheme, "dt_ref": dt_ref}),
        )),
        None => Err(CliError::Config(format!(
            "problem {} has no exact oracle; set reference_dt to use a reference scheme",
            problem.name
        ))),
    }
}

fn study_config(cfg: &RunConfig, problem: &SdeProblem, dt_list: Vec<f64>) -> Result<StudyConfig, CliError> {
    let dt_fine = cfg.dt_fine_for(&dt_list);
    if !(cfg.r >= 0.0) {
        return Err(CliError::Config(format!("r = {} must be nonnegative", cfg.r)));
    }
    Ok(StudyConfig {
        dt_list,
        r: cfg.r,
        depth: cfg.depth(),
        dt_fine,
        xi: InitialCondition::fixed(cfg.xi(problem.state_dim)?),
        linear_in_fractional_step: cfg.linear_in_fractional_step,
    })
}

pub fn converge(cfg: &RunConfig, out: &Path, seed_offset: u64, assertion: Option<OrderAssertion>) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let study = study_config(cfg, &problem, cfg.dt_list()?)?;
    let (truth, truth_desc) = truth_for(cfg, &problem)?;
    let seeds = nonempty(cfg.seeds(seed_offset))?;

    let table = analysis::strong_error_study(&problem, cfg.scheme, &study, &truth, &seeds)?;
    write_with(out, "error_table.csv", |w| table.write_csv(w))?;
    let fit = analysis::fit_order(&table)?;
    let verdict = assertion.map(|a| (a, (fit.slope - a.order).abs() <= a.band));

    let mut doc = summary("converge", cfg, &problem, &seeds);
    doc["scheme"] = json!(cfg.scheme);
    doc["slope"] = json!(fit.slope);
    doc["intercept"] = json!(fit.intercept);
    doc["r_squared"] = json!(fit.r_squared);
    doc["slope_stderr"] = json!(fit.slope_stderr);
    doc["slope_ci"] = json!(fit.slope_ci);
    doc["truth"] = truth_desc;
    doc["depth"] = json!(study.depth);
    doc["dt_fine"] = json!(study.dt_fine);
    if let Some((a, passed)) = verdict {
        doc["assertion"] = json!({"order": a.order, "band": a.band, "passed": passed});
    }
    write_json(out, "fit.json", &doc)?;
    match verdict {
        Some((a, false)) => Err(CliError::Assertion(format!(
            "fitted slope {:.4} is outside {} ± {}",
            fit.slope, a.order, a.band
        ))),
        _ => Ok(()),
    }
}

pub fn diagnose(cfg: &RunConfig, out: &Path, seed_offset: u64) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let report = model::validate(&problem)?;
    let dt_fine = cfg.dt_fine.unwrap_or(cfg.dt);
    let scheme = scheme_for(cfg, &problem, &report, dt_fine)?;
    let xi = InitialCondition::fixed(cfg.xi(problem.state_dim)?);
    let seeds = nonempty(cfg.seeds(seed_offset))?;
    let tau = problem.tau;
    let k = cfg.k_max;

    let t_end = cfg.t_end.unwrap_or(2.0 * tau);
    let t_step = cfg.t_step.unwrap_or(cfg.dt);
    if !(t_step > 0.0 && t_end >= 0.0) {
        return Err(CliError::Config("t_step must be positive and t_end nonnegative".into()));
    }
    let n_grid = (t_end / t_step).round() as usize;
    let grid: Vec<f64> = (0..=n_grid).map(|j| j as f64 * t_step).collect();
    let window = PairWindow {
        start: cfg.pair_start.unwrap_or(-(k as f64) * tau),
        end: cfg.pair_end.unwrap_or(0.0),
        compare_from: cfg.compare_from.unwrap_or(cfg.pair_end.unwrap_or(0.0)),
    };
    if window.end <= window.start {
        return Err(CliError::Config("pair_end must exceed pair_start".into()));
    }

    let default_min = (-(k as f64) * tau - t_end).min(window.start - tau);
    let t_min = cfg.path_start.unwrap_or(default_min);
    let paths = build_paths(&seeds, problem.noise_dim, dt_fine, t_min, window.end.max(0.0))?;

    let pair = pullback::shifted_pair(&problem, &scheme, &paths[0], window, &xi.value_for(&paths[0]))?;
    let series = pullback::periodicity_diagnostic(&problem, &scheme, &paths, &grid, k, &xi)?;
    let defects: Vec<f64> = series.iter().map(|s| s.periodicity_defect(tau)).collect();
    let max_defect = defects.iter().copied().fold(0.0, f64::max);

    write_with(out, "pair.csv", |w| pullback::write_pair_csv(&pair, w))?;
    write_with(out, "series.csv", |w| pullback::write_series_csv(&series, w))?;
    let mut s = summary("diagnose", cfg, &problem, &seeds);
    s["conditions"] = report_json(&report);
    s["pair_window"] = json!(window);
    s["pair_max_defect"] = json!(pair.max_defect);
    s["series_max_periodicity_defect"] = json!(max_defect);
    s["series_periodicity_defects"] = json!(defects);
    write_json(out, "summary.json", &s)
}

pub fn measure(cfg: &RunConfig, out: &Path, seed_offset: u64) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let dt_list = cfg
        .dt_list
        .clone()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| CliError::Config("dt_list is required for measure".into()))?;
    let study = study_config(cfg, &problem, dt_list)?;
    let (truth, truth_desc) = truth_for(cfg, &problem)?;
    if cfg.samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    let mc = MeasureConfig {
        n_samples: cfg.samples as usize,
        base_seed: cfg.base_seed + seed_offset,
        resamples: cfg.bootstrap,
        bootstrap_seed: cfg.bootstrap_seed,
    };
    let rows = analysis::periodic_measure_convergence(&problem, cfg.scheme, &study, &truth, &mc)?;
    write_with(out, "measure.csv", |w| analysis::write_measure_csv(&rows, w))?;
    let seeds: Vec<u64> = (mc.base_seed..mc.base_seed + 2 * cfg.samples).collect();
    let mut s = summary("measure", cfg, &problem, &seeds);
    s["truth"] = truth_desc;
    s["scheme_seeds"] = json!([mc.base_seed, mc.base_seed + cfg.samples]);
    s["truth_seeds"] = json!([mc.base_seed + cfg.samples, mc.base_seed + 2 * cfg.samples]);
    s["rows"] = json!(rows);
    write_json(out, "summary.json", &s)
}

pub fn floquet_cmd(cfg: &RunConfig, out: &Path, seed_offset: u64) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let dt_fine = cfg.dt_fine.unwrap_or(cfg.dt);
    let h = cfg.floquet_h.unwrap_or(dt_fine);
    let data = FloquetData::for_problem(&problem, h)?;
    write_json(out, "floquet.json", &data.to_json(cfg.floquet_grids))?;

    let mut report = json!({
        "problem": problem.name,
        "tau": problem.tau,
        "h": h,
        "log_residual": data.log_residual,
        "s_period_defect": data.s_period_defect(),
        "gamma": data.gamma,
        "gamma_uniform": data.gamma_uniform,
        "s_is_identity": data.s_grid.iter().all(|s| (s - rpsim_core::nalgebra::DMatrix::identity(data.dim, data.dim)).abs().max() <= 1e-9),
        "proxy_metrics": W1_PROXY_NOTE,
    });
    let data = Arc::new(data);
    let lf = match floquet::lf_transform(&problem, data.clone()) {
        Ok(lf) => lf,
        Err(e) => {
            report["transform"] = json!({"ok": false, "error": e.to_string()});
            write_json(out, "report.json", &report)?;
            return Err(e.into());
        }
    };
    let transformed = &lf.problem;
    let conditions = model::validate(transformed)?;
    report["transform"] = json!({
        "ok": true,
        "period": transformed.tau,
        "beta1": transformed.constants.beta1,
        "beta2": transformed.constants.beta2,
        "conditions": report_json(&conditions),
    });

    // Pull-back on the transformed problem, mapped back with S(t).
    let ratio = cfg.dt / h;
    if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(Error::GridAlignment(format!("dt = {} is not a multiple of the Floquet grid h = {h}", cfg.dt)).into());
    }
    let scheme = scheme_for(cfg, transformed, &conditions, dt_fine)?;
    let seeds = nonempty(cfg.seeds(seed_offset))?;
    let xi_x = cfg.xi(problem.state_dim)?;
    // S is 2τ-periodic with S(0) = I, so every start -k·2τ maps ξ to itself.
    let xi = InitialCondition::fixed(lf.map_initial(0.0, &xi_x));
    let t_min = cfg.path_start.unwrap_or(-(cfg.k_max as f64) * transformed.tau);
    let paths = build_paths(&seeds, problem.noise_dim, dt_fine, t_min, cfg.r.max(0.0))?;
    let z = pullback::pullback_rps(transformed, &scheme, &paths, cfg.r, cfg.k_max, cfg.tol, &xi)?;
    let s_r = data.s_at(cfg.r);
    let mapped = PullbackResult {
        values: z
            .values
            .iter()
            .map(|v| (&s_r * rpsim_core::nalgebra::DVector::from_column_slice(v)).iter().copied().collect())
            .collect(),
        ..z.clone()
    };
    let t0 = -(z.k_used as f64) * transformed.tau;
    let z_traj = schemes::integrate(transformed, &scheme, &paths[0], t0, cfg.r, &xi.value_for(&paths[0]))?;
    let x_traj = floquet::map_back(&data, &z_traj)?;
    write_with(out, "trajectory.csv", |w| x_traj.write_csv(w))?;
    write_json(out, "pullback.json", &serde_json::to_value(&mapped).expect("serialises"))?;
    report["pullback"] = json!({"k_used": z.k_used, "converged": z.converged, "cauchy_gaps": z.cauchy_gaps});
    write_json(out, "report.json", &report)
}
