// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Reference solutions for the scalar linear benchmark
//!
//! ```text
//! dX = a X dt + F(t) dt + c X dW
//! ```
//!
//! whose flow is explicit by variation of constants. With `κ = a - c²/2`
//! the propagator from `s` to `t` is `exp(κ(t-s) + c(W_t - W_s))`, and the
//! random periodic solution is
//!
//! ```text
//! X*_t = ∫_{-∞}^t exp(κ(t-s) + c(W_t - W_s)) F(s) ds.
//! ```
//!
//! Integrals are evaluated by the trapezoid rule on the path's fine grid.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::SdeProblem;
use crate::noise::WienerPath;

#[derive(Clone)]
pub struct LinearScalarProblem {
    pub a: f64,
    pub c: f64,
    pub forcing: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `sup |F|`, used for the truncation bound.
    pub forcing_sup: f64,
    pub tau: f64,
}

impl fmt::Debug for LinearScalarProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearScalarProblem")
            .field("a", &self.a)
            .field("c", &self.c)
            .field("forcing_sup", &self.forcing_sup)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

impl LinearScalarProblem {
    /// `F(t) = amplitude · sin(2πt/τ)`.
    pub fn sine(a: f64, c: f64, amplitude: f64, tau: f64) -> Self {
        let omega = 2.0 * std::f64::consts::PI / tau;
        LinearScalarProblem {
            a,
            c,
            forcing: Arc::new(move |t| amplitude * (omega * t).sin()),
            forcing_sup: amplitude.abs(),
            tau,
        }
    }

    /// The oracle for [`crate::model::builtin::example1`].
    pub fn example1() -> Self {
        Self::sine(-std::f64::consts::PI, 1.0, 1.0, 2.0)
    }

    pub fn kappa(&self) -> f64 {
        self.a - 0.5 * self.c * self.c
    }

    /// `a + c²/2 < 0`.
    pub fn is_dissipative(&self) -> bool {
        self.a + 0.5 * self.c * self.c < 0.0
    }

    /// Recover the oracle for a scalar problem built by
    /// [`crate::model::builtin::linear_scalar`], checking that the SDE's
    /// coefficients match at a few probe points.
    pub fn matching(problem: &SdeProblem, candidate: LinearScalarProblem) -> Option<Self> {
        let a = problem.constant_linear()?;
        if problem.state_dim != 1 || problem.noise_dim != 1 || a[(0, 0)] != candidate.a {
            return None;
        }
        for (t, x) in [(0.13, 0.7), (-1.1, -2.0), (0.5, 0.0), (1.77, 3.1)] {
            let f = problem.eval_drift(t, &[x])[0];
            let g = problem.eval_diffusion(t, &[x])[0];
            if (f - (candidate.forcing)(t)).abs() > 1e-14 || (g - candidate.c * x).abs() > 1e-14 {
                return None;
            }
        }
        Some(candidate)
    }
}

/// Trapezoid sum of `exp(κ(t-s) + c(W_t - W_s)) F(s)` over nodes
/// `k_lo, k_lo + stride, …, k_hi`.
fn weighted_integral(p: &LinearScalarProblem, path: &WienerPath, k_lo: i64, k_hi: i64, stride: i64) -> f64 {
    let kappa = p.kappa();
    let t = path.time_of(k_hi);
    let w_t = path.raw(k_hi, 0);
    let h = stride as f64 * path.dt_fine();
    let integrand = |k: i64| {
        let s = path.time_of(k);
        (kappa * (t - s) + p.c * (w_t - path.raw(k, 0))).exp() * (p.forcing)(s)
    };
    if k_hi == k_lo {
        return 0.0;
    }
    let mut sum = 0.5 * integrand(k_lo);
    let mut k = k_lo + stride;
    while k < k_hi {
        sum += integrand(k);
        k += stride;
    }
    sum += 0.5 * integrand(k_hi);
    sum * h
}

/// The exact solution at `t` started from `xi` at `t0`, with the forcing
/// integral by trapezoid on the fine grid.
pub fn exact_flow(p: &LinearScalarProblem, path: &WienerPath, t0: f64, t: f64, xi: f64) -> Result<f64> {
    let k0 = path.node_of(t0)?;
    let k1 = path.node_of(t)?;
    if k1 < k0 {
        return Err(Error::Domain(format!("t = {t} precedes t0 = {t0}")));
    }
    let growth = (p.kappa() * (t - t0) + p.c * (path.raw(k1, 0) - path.raw(k0, 0))).exp();
    Ok(growth * xi + weighted_integral(p, path, k0, k1, 1))
}

/// A truncated random periodic value with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpsValue {
    pub value: f64,
    /// Bound on `E|X*_t - value|` from the neglected tail:
    /// `sup|F| · e^{aT} / |a|` (infinite when `a ≥ 0`).
    pub tail_bound: f64,
}

/// `X*_t` truncated to `[t - T, t]`.
pub fn exact_rps(p: &LinearScalarProblem, path: &WienerPath, t: f64, truncation: f64) -> Result<RpsValue> {
    exact_rps_strided(p, path, t, truncation, 1)
}

/// As [`exact_rps`] with quadrature on every `stride`-th fine node; used for
/// Richardson checks of the quadrature error.
pub fn exact_rps_strided(p: &LinearScalarProblem, path: &WienerPath, t: f64, truncation: f64, stride: usize) -> Result<RpsValue> {
    if stride == 0 || !(truncation >= 0.0) {
        return Err(Error::Domain("stride must be positive and truncation nonnegative".into()));
    }
    let k1 = path.node_of(t)?;
    let span = path.steps_in(truncation)?;
    let k0 = k1 - span;
    if !path.contains_node(k0) {
        return Err(Error::Extent(format!(
            "truncation window [{}, {t}] leaves the path extent [{}, {}]",
            t - truncation,
            path.t_min(),
            path.t_max()
        )));
    }
    if span % stride as i64 != 0 {
        return Err(Error::GridAlignment(format!(
            "stride {stride} does not divide the {span} fine steps of the window"
        )));
    }
    let tail_bound = if p.a < 0.0 {
        p.forcing_sup * (p.a * truncation).exp() / p.a.abs()
    } else {
        f64::INFINITY
    };
    Ok(RpsValue {
        value: weighted_integral(p, path, k0, k1, stride as i64),
        tail_bound,
    })
}
