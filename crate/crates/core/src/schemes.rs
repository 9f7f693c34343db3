// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-step integrators: Euler–Maruyama and the derivative-free modified
//! Milstein scheme, both with the linear part treated explicitly.
//!
//! Euler–Maruyama:
//!
//! ```text
//! X_{i+1} = X_i + A X_i Δt + f(t_i, X_i) Δt + g(t_i, X_i) ΔW_i
//! ```
//!
//! Modified Milstein adds two stage differences evaluated at
//! `U± = X_i + A X_i Δt + f(t_i, X_i) Δt ± g(t_i, X_i) √Δt`:
//!
//! ```text
//! + ΔZ_i / (2√Δt) · [f(t_i, U+) - f(t_i, U-)]
//! + (ΔW_i² - Δt) / (4√Δt) · [g(t_i, U+) - g(t_i, U-)]
//! ```
//!
//! The linear part enters through the propagator `P = I + AΔt`, computed
//! once per run, so `X_{i+1} = P X_i + f Δt + g ΔW`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{integral, Error, Result};
use crate::model::{ConditionReport, SdeProblem};
use crate::noise::{delta_z_from, WienerPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    EulerMaruyama,
    ModifiedMilstein,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeKind::EulerMaruyama => "euler-maruyama",
            SchemeKind::ModifiedMilstein => "modified-milstein",
        })
    }
}

/// Step size and scheme choice for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub dt: f64,
    /// `dt / dt_fine`.
    pub coarse_factor: usize,
    /// Include the `A X (r - N'Δt)` term in the fractional last step. Off by
    /// default: the partial step is taken with `f` and `g` only.
    pub linear_in_fractional_step: bool,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, dt: f64, dt_fine: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let m = integral(dt / dt_fine).filter(|m| *m >= 1).ok_or_else(|| {
            Error::GridAlignment(format!("dt = {dt} is not a positive multiple of dt_fine = {dt_fine}"))
        })?;
        Ok(SchemeConfig {
            kind,
            dt,
            coarse_factor: m as usize,
            linear_in_fractional_step: false,
        })
    }

    pub fn with_linear_fractional_step(mut self, on: bool) -> Self {
        self.linear_in_fractional_step = on;
        self
    }

    /// `τ/dt` must be an integer for the discrete semiflow to be periodic.
    pub fn check_period(&self, tau: f64) -> Result<usize> {
        integral(tau / self.dt)
            .filter(|n| *n >= 1)
            .map(|n| n as usize)
            .ok_or_else(|| {
                Error::GridAlignment(format!(
                    "dt = {} does not divide the period τ = {tau} (τ/dt = {})",
                    self.dt,
                    tau / self.dt
                ))
            })
    }

    /// `dt ≤ 1/ρ`.
    pub fn check_stability(&self, report: &ConditionReport) -> Result<()> {
        if self.dt > report.dt_max {
            return Err(Error::Domain(format!(
                "dt = {} exceeds the stability bound 1/ρ = {}",
                self.dt, report.dt_max
            )));
        }
        Ok(())
    }
}

/// Timestamped states of one scheme run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Row-major: `state_dim` values per time.
    pub states: Vec<f64>,
    pub state_dim: usize,
    pub scheme: SchemeConfig,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Index of the node at time `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol)
    }

    /// CSV with header `t,x_1,…,x_m`, 17 significant digits, LF endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.state_dim).map(|i| format!("x_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{}", fmt_f64(*t))?;
            for v in self.state(i) {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn propagator(problem: &SdeProblem, dt: f64) -> Result<Vec<f64>> {
    let a = problem.constant_linear().ok_or_else(|| {
        Error::condition(
            "A",
            "schemes need a constant linear part; apply the Lyapunov-Floquet transform first",
        )
    })?;
    let m = problem.state_dim;
    let mut p = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            p[i * m + j] = if i == j { 1.0 } else { 0.0 } + a[(i, j)] * dt;
        }
    }
    Ok(p)
}

/// `out = P x + f dt` (the drift part of a step).
#[inline]
fn drift_part(p: &[f64], x: &[f64], f: &[f64], dt: f64, out: &mut [f64]) {
    let m = x.len();
    for i in 0..m {
        let mut px = 0.0;
        for j in 0..m {
            px += p[i * m + j] * x[j];
        }
        out[i] = px + f[i] * dt;
    }
}

/// `out += g dW` with `g` row-major `m × d`.
#[inline]
fn add_noise(g: &[f64], dw: &[f64], out: &mut [f64]) {
    let d = dw.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..d {
            s += g[i * d + k] * dw[k];
        }
        *o += s;
    }
}

/// Reusable per-run state: the propagator and scratch buffers.
pub(crate) struct Stepper<'a> {
    problem: &'a SdeProblem,
    kind: SchemeKind,
    dt: f64,
    sqrt_dt: f64,
    prop: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    base: Vec<f64>,
    stage: Vec<f64>,
    fp: Vec<f64>,
    fm: Vec<f64>,
    gp: Vec<f64>,
    gm: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(problem: &'a SdeProblem, kind: SchemeKind, dt: f64) -> Result<Self> {
        let m = problem.state_dim;
        let md = m * problem.noise_dim;
        Ok(Stepper {
            problem,
            kind,
            dt,
            sqrt_dt: dt.sqrt(),
            prop: propagator(problem, dt)?,
            f: vec![0.0; m],
            g: vec![0.0; md],
            base: vec![0.0; m],
            stage: vec![0.0; m],
            fp: vec![0.0; m],
            fm: vec![0.0; m],
            gp: vec![0.0; md],
            gm: vec![0.0; md],
        })
    }

    /// One full step from `x` at `t` into `out`.
    pub(crate) fn step(&mut self, t: f64, x: &[f64], dw: &[f64], dz: &[f64], out: &mut [f64]) {
        let p = self.problem;
        (p.drift)(t, x, &mut self.f);
        (p.diffusion)(t, x, &mut self.g);
        drift_part(&self.prop, x, &self.f, self.dt, &mut self.base);
        out.copy_from_slice(&self.base);
        add_noise(&self.g, dw, out);
        if self.kind == SchemeKind::ModifiedMilstein {
            self.milstein_correction(t, dw, dz, out);
        }
    }

    // Stage differences column by column; for d = 1 this is the scheme as
    // written, for d > 1 it is the diagonal-noise extension (no cross terms).
    fn milstein_correction(&mut self, t: f64, dw: &[f64], dz: &[f64], out: &mut [f64]) {
        let p = self.problem;
        let m = p.state_dim;
        let d = p.noise_dim;
        for k in 0..d {
            for i in 0..m {
                self.stage[i] = self.base[i] + self.g[i * d + k] * self.sqrt_dt;
            }
            (p.drift)(t, &self.stage, &mut self.fp);
            (p.diffusion)(t, &self.stage, &mut self.gp);
            for i in 0..m {
                self.stage[i] = self.base[i] - self.g[i * d + k] * self.sqrt_dt;
            }
            (p.drift)(t, &self.stage, &mut self.fm);
            (p.diffusion)(t, &self.stage, &mut self.gm);
            let c_f = dz[k] / (2.0 * self.sqrt_dt);
            let c_g = (dw[k] * dw[k] - self.dt) / (4.0 * self.sqrt_dt);
            for i in 0..m {
                out[i] = out[i] + c_f * (self.fp[i] - self.fm[i]) + c_g * (self.gp[i * d + k] - self.gm[i * d + k]);
            }
        }
    }

    /// Partial step over `h < dt` with the increment `dw` over the same span.
    pub(crate) fn fractional(&mut self, t: f64, x: &[f64], dw: &[f64], h: f64, with_linear: bool, out: &mut [f64]) {
        let p = self.problem;
        let m = p.state_dim;
        (p.drift)(t, x, &mut self.f);
        (p.diffusion)(t, x, &mut self.g);
        let a = p.constant_linear().expect("checked in Stepper::new");
        for i in 0..m {
            let mut v = x[i];
            if with_linear {
                let mut ax = 0.0;
                for j in 0..m {
                    ax += a[(i, j)] * x[j];
                }
                v += ax * h;
            }
            out[i] = v + self.f[i] * h;
        }
        add_noise(&self.g, dw, out);
    }
}

fn check_finite(x: &[f64], step: usize, time: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            time,
            seed: None,
        })
    }
}

/// One Euler–Maruyama step.
pub fn em_step(problem: &SdeProblem, t: f64, x: &[f64], dw: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut s = Stepper::new(problem, SchemeKind::EulerMaruyama, dt)?;
    let mut out = vec![0.0; problem.state_dim];
    s.step(t, x, dw, &[], &mut out);
    check_finite(&out, 0, t)?;
    Ok(out)
}

/// Supporting stages `U± = x + A x dt + f(t, x) dt ± g(t, x) √dt` for scalar noise.
pub fn milstein_stages(problem: &SdeProblem, t: f64, x: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if problem.noise_dim != 1 {
        return Err(Error::Domain(format!(
            "stage pair is defined for scalar noise, got d = {}",
            problem.noise_dim
        )));
    }
    let prop = propagator(problem, dt)?;
    let f = problem.eval_drift(t, x);
    let g = problem.eval_diffusion(t, x);
    let mut base = vec![0.0; problem.state_dim];
    drift_part(&prop, x, &f, dt, &mut base);
    let s = dt.sqrt();
    let plus = base.iter().zip(&g).map(|(b, g)| b + g * s).collect();
    let minus = base.iter().zip(&g).map(|(b, g)| b - g * s).collect();
    Ok((plus, minus))
}

/// One modified Milstein step. For `d > 1` the stage differences are taken
/// per noise column, which drops the mixed iterated integrals; treat that
/// case as experimental.
pub fn milstein_step(problem: &SdeProblem, t: f64, x: &[f64], dw: &[f64], dz: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !problem.milstein_ready {
        return Err(Error::condition(
            "1'",
            "problem does not declare bounded first x-derivatives of f and g",
        ));
    }
    let mut s = Stepper::new(problem, SchemeKind::ModifiedMilstein, dt)?;
    let mut out = vec![0.0; problem.state_dim];
    s.step(t, x, dw, dz, &mut out);
    check_finite(&out, 0, t)?;
    Ok(out)
}

/// Core driver: steps from `t_start` to `t_end` on `path`, calling
/// `observe(t, x)` at every node including the first and last, and returns
/// the final state.
pub(crate) fn run<F: FnMut(f64, &[f64])>(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    path: &WienerPath,
    t_start: f64,
    t_end: f64,
    xi: &[f64],
    mut observe: F,
) -> Result<Vec<f64>> {
    if xi.len() != problem.state_dim {
        return Err(Error::Domain(format!(
            "initial value has length {}, expected {}",
            xi.len(),
            problem.state_dim
        )));
    }
    if !xi.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("initial value is not finite".into()));
    }
    if path.dim() != problem.noise_dim {
        return Err(Error::Domain(format!(
            "path has {} noise dimensions, problem expects {}",
            path.dim(),
            problem.noise_dim
        )));
    }
    if scheme.kind == SchemeKind::ModifiedMilstein && !problem.milstein_ready {
        return Err(Error::condition(
            "1'",
            "problem does not declare bounded first x-derivatives of f and g",
        ));
    }
    let scale = scheme.dt / path.dt_fine();
    if integral(scale) != Some(scheme.coarse_factor as i64) {
        return Err(Error::GridAlignment(format!(
            "scheme built for dt/dt_fine = {}, path gives {scale}",
            scheme.coarse_factor
        )));
    }
    let k_start = path.node_of(t_start)?;
    let k_end = path.node_of(t_end)?;
    if k_end < k_start {
        return Err(Error::Domain(format!("t_end = {t_end} precedes t_start = {t_start}")));
    }

    let m = scheme.coarse_factor as i64;
    let d = problem.noise_dim;
    let n_full = (k_end - k_start) / m;
    let remainder = (k_end - k_start) % m;

    let mut stepper = Stepper::new(problem, scheme.kind, scheme.dt)?;
    let mut x = xi.to_vec();
    let mut next = vec![0.0; problem.state_dim];
    let mut dw = vec![0.0; d];
    let mut dz = vec![0.0; d];
    let milstein = scheme.kind == SchemeKind::ModifiedMilstein;

    observe(path.time_of(k_start), &x);
    for i in 0..n_full {
        let k0 = k_start + i * m;
        let k1 = k0 + m;
        let t = path.time_of(k0);
        for j in 0..d {
            dw[j] = path.raw(k1, j) - path.raw(k0, j);
            if milstein {
                let dv = path.raw_aux(k1, j) - path.raw_aux(k0, j);
                dz[j] = delta_z_from(scheme.dt, dw[j], dv);
            }
        }
        stepper.step(t, &x, &dw, &dz, &mut next);
        check_finite(&next, i as usize, t)?;
        std::mem::swap(&mut x, &mut next);
        observe(path.time_of(k1), &x);
    }
    if remainder > 0 {
        let k0 = k_start + n_full * m;
        for j in 0..d {
            dw[j] = path.raw(k_end, j) - path.raw(k0, j);
        }
        let t = path.time_of(k0);
        let h = remainder as f64 * path.dt_fine();
        stepper.fractional(t, &x, &dw, h, scheme.linear_in_fractional_step, &mut next);
        check_finite(&next, n_full as usize, t)?;
        std::mem::swap(&mut x, &mut next);
        observe(path.time_of(k_end), &x);
    }
    Ok(x)
}

/// Final state only.
pub fn propagate(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    path: &WienerPath,
    t_start: f64,
    t_end: f64,
    xi: &[f64],
) -> Result<Vec<f64>> {
    run(problem, scheme, path, t_start, t_end, xi, |_, _| {}).map_err(|e| e.with_seed(path.seed()))
}

/// Integrate from `t_start` to `t_end`, recording every node. When `t_end`
/// falls strictly between two scheme nodes the last state comes from the
/// fractional step.
pub fn integrate(
    problem: &SdeProblem,
    scheme: &SchemeConfig,
    path: &WienerPath,
    t_start: f64,
    t_end: f64,
    xi: &[f64],
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    run(problem, scheme, path, t_start, t_end, xi, |t, x| {
        times.push(t);
        states.extend_from_slice(x);
    })
    .map_err(|e| e.with_seed(path.seed()))?;
    Ok(Trajectory {
        times,
        states,
        state_dim: problem.state_dim,
        scheme: *scheme,
        seed: path.seed(),
    })
}
