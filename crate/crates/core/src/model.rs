// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! SDE problem definitions and their standing-condition checks.
//!
//! A problem is `dX = [A X + f(t, X)] dt + g(t, X) dW` with either a
//! constant symmetric `A` or a `τ`-periodic `A(t)`. The Lipschitz and growth
//! constants are declared by the user; [`assess`] and [`linear_growth_probe`]
//! can falsify them at sample points but never prove them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::WienerPath;

/// `(t, x, out)`: writes `f(t, x)` (length `m`) or `g(t, x)` (row-major
/// `m × d`) into `out`. Must be a pure function.
pub type CoefficientFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// `t ↦ A(t)` for the periodic linear part.
pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum LinearPart {
    Constant(DMatrix<f64>),
    Periodic(MatrixFn),
}

impl LinearPart {
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            LinearPart::Constant(a) => a.clone(),
            LinearPart::Periodic(f) => f(t),
        }
    }
}

/// Declared regularity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Lipschitz constant of `f` in `x`.
    pub beta1: f64,
    /// Lipschitz constant of `g` in `x`.
    pub beta2: f64,
    /// Hölder-in-time constant shared by `f` and `g`.
    pub c0: f64,
    pub c0_drift: Option<f64>,
    pub c0_diffusion: Option<f64>,
    /// Linear-growth offsets: `|f| ≤ β₁|x| + C₁`, `|g| ≤ β₂|x| + C₂`.
    pub c1: f64,
    pub c2: f64,
}

impl Constants {
    pub fn new(beta1: f64, beta2: f64, c0: f64, c1: f64, c2: f64) -> Self {
        Constants {
            beta1,
            beta2,
            c0,
            c0_drift: None,
            c0_diffusion: None,
            c1,
            c2,
        }
    }

    pub fn c0_drift(&self) -> f64 {
        self.c0_drift.unwrap_or(self.c0)
    }

    pub fn c0_diffusion(&self) -> f64 {
        self.c0_diffusion.unwrap_or(self.c0)
    }

    fn dissipation(&self) -> f64 {
        self.beta1 + 0.5 * self.beta2 * self.beta2
    }
}

/// A dissipative SDE with time-periodic coefficients.
#[derive(Clone)]
pub struct SdeProblem {
    pub name: String,
    /// State dimension `m`.
    pub state_dim: usize,
    /// Noise dimension `d`.
    pub noise_dim: usize,
    pub linear: LinearPart,
    pub drift: CoefficientFn,
    pub diffusion: CoefficientFn,
    pub tau: f64,
    pub constants: Constants,
    /// ½ for the Hölder-½ time regularity, 1 for Lipschitz time regularity.
    pub holder_exponent: f64,
    /// The first `x`-derivatives of `f` and `g` are bounded.
    pub milstein_ready: bool,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("tau", &self.tau)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl SdeProblem {
    pub fn constant_linear(&self) -> Option<&DMatrix<f64>> {
        match &self.linear {
            LinearPart::Constant(a) => Some(a),
            LinearPart::Periodic(_) => None,
        }
    }

    pub fn eval_drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        (self.drift)(t, x, &mut out);
        out
    }

    pub fn eval_diffusion(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        (self.diffusion)(t, x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub condition: String,
    pub passed: bool,
    pub detail: String,
}

/// Spectral data and condition verdicts for a constant-`A` problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Largest eigenvalue of `A` (closest to zero).
    pub lambda1: f64,
    /// Smallest eigenvalue of `A`.
    pub lambda_m: f64,
    /// `|λ_m|`.
    pub rho: f64,
    /// Largest admissible step, `1/ρ`.
    pub dt_max: f64,
    /// `|λ₁| - β₁ - β₂²/2`.
    pub margin: f64,
    /// Midpoint of `(β₁ + β₂²/2, |λ₁|)`.
    pub alpha: f64,
    pub checks: Vec<Check>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// First failing check, if any.
    pub fn failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const PERIODICITY_TOL: f64 = 1e-10;
const PERIODICITY_PROBES: usize = 16;

/// Evaluate every standing condition and report, without failing.
pub fn assess(problem: &SdeProblem) -> Result<ConditionReport> {
    let a = problem.constant_linear().ok_or_else(|| {
        Error::condition(
            "A",
            "time-dependent linear part; reduce it with the Lyapunov-Floquet transform first",
        )
    })?;
    if a.nrows() != problem.state_dim || a.ncols() != problem.state_dim {
        return Err(Error::Domain(format!(
            "A is {}x{}, expected {}x{}",
            a.nrows(),
            a.ncols(),
            problem.state_dim,
            problem.state_dim
        )));
    }
    let mut checks = Vec::new();

    let asym = (a - a.transpose()).abs().max();
    checks.push(Check {
        condition: "A".into(),
        passed: asym <= SYMMETRY_TOL,
        detail: format!("max |A - Aᵀ| = {asym:e}"),
    });

    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5).eigenvalues;
    let lambda1 = eig.max();
    let lambda_m = eig.min();
    checks.push(Check {
        condition: "A".into(),
        passed: lambda1 < 0.0,
        detail: format!("largest eigenvalue λ₁ = {lambda1}"),
    });

    let c = &problem.constants;
    let margin = lambda1.abs() - c.dissipation();
    checks.push(Check {
        condition: "1".into(),
        passed: margin > 0.0,
        detail: format!(
            "margin |λ₁| - β₁ - β₂²/2 = {} - {} - {} = {margin}",
            lambda1.abs(),
            c.beta1,
            0.5 * c.beta2 * c.beta2
        ),
    });

    let nonneg = [c.beta1, c.beta2, c.c0_drift(), c.c0_diffusion(), c.c1, c.c2]
        .iter()
        .all(|v| *v >= 0.0 && v.is_finite());
    checks.push(Check {
        condition: "1".into(),
        passed: nonneg,
        detail: "declared constants nonnegative".into(),
    });

    let defect = periodicity_defect(problem);
    checks.push(Check {
        condition: "1".into(),
        passed: defect <= PERIODICITY_TOL,
        detail: format!("max periodicity defect of f, g over {PERIODICITY_PROBES} probes = {defect:e}"),
    });

    let rho = lambda_m.abs();
    Ok(ConditionReport {
        lambda1,
        lambda_m,
        rho,
        dt_max: 1.0 / rho,
        margin,
        alpha: 0.5 * (c.dissipation() + lambda1.abs()),
        checks,
    })
}

/// Check Conditions (A) and (1), failing on the first violation.
pub fn validate(problem: &SdeProblem) -> Result<ConditionReport> {
    let report = assess(problem)?;
    if let Some(check) = report.failure() {
        return Err(Error::condition(&check.condition, check.detail.clone()));
    }
    Ok(report)
}

fn periodicity_defect(problem: &SdeProblem) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let m = problem.state_dim;
    let mut worst: f64 = 0.0;
    for _ in 0..PERIODICITY_PROBES {
        let t = rng.random_range(-problem.tau..problem.tau);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f0 = problem.eval_drift(t, &x);
        let f1 = problem.eval_drift(t + problem.tau, &x);
        let g0 = problem.eval_diffusion(t, &x);
        let g1 = problem.eval_diffusion(t + problem.tau, &x);
        for (u, v) in f0.iter().zip(&f1).chain(g0.iter().zip(&g1)) {
            worst = worst.max((u - v).abs());
        }
        if let LinearPart::Periodic(a) = &problem.linear {
            worst = worst.max((a(t) - a(t + problem.tau)).abs().max());
        }
    }
    worst
}

/// Box of probe points for [`linear_growth_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox {
    pub t_min: f64,
    pub t_max: f64,
    /// Each state coordinate ranges over `[-x_radius, x_radius]`.
    pub x_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthViolation {
    pub t: f64,
    pub x: Vec<f64>,
    pub which: &'static str,
    pub norm: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProbeReport {
    pub passed: bool,
    pub violations: Vec<GrowthViolation>,
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Check the growth bounds at a single point.
pub fn growth_violations_at(problem: &SdeProblem, t: f64, x: &[f64]) -> Vec<GrowthViolation> {
    let c = &problem.constants;
    let nx = norm2(x);
    let mut out = Vec::new();
    let nf = norm2(&problem.eval_drift(t, x));
    let bf = c.beta1 * nx + c.c1;
    if nf > bf * (1.0 + 1e-12) {
        out.push(GrowthViolation {
            t,
            x: x.to_vec(),
            which: "f",
            norm: nf,
            bound: bf,
        });
    }
    let ng = norm2(&problem.eval_diffusion(t, x));
    let bg = c.beta2 * nx + c.c2;
    if ng > bg * (1.0 + 1e-12) {
        out.push(GrowthViolation {
            t,
            x: x.to_vec(),
            which: "g",
            norm: ng,
            bound: bg,
        });
    }
    out
}

/// Probe `|f| ≤ β₁|x| + C₁` and `|g| ≤ β₂|x| + C₂` at random points of the box.
/// Report-only: a pass is evidence, not proof.
pub fn linear_growth_probe(problem: &SdeProblem, sample_box: ProbeBox, n_probes: usize) -> GrowthProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0b);
    let mut violations = Vec::new();
    for _ in 0..n_probes {
        let t = if sample_box.t_max > sample_box.t_min {
            rng.random_range(sample_box.t_min..sample_box.t_max)
        } else {
            sample_box.t_min
        };
        let x: Vec<f64> = (0..problem.state_dim)
            .map(|_| rng.random_range(-sample_box.x_radius..=sample_box.x_radius))
            .collect();
        violations.extend(growth_violations_at(problem, t, &x));
    }
    GrowthProbeReport {
        passed: violations.is_empty(),
        violations,
    }
}

/// How the initial value at the pull-back start is produced.
#[derive(Clone)]
pub enum InitialKind {
    Deterministic(Vec<f64>),
    /// Per-seed sampler; receives the path so draws can depend on its seed.
    Sampled(Arc<dyn Fn(&WienerPath) -> Vec<f64> + Send + Sync>),
}

/// An initial value `ξ` with its declared L² bound `K*`.
#[derive(Clone)]
pub struct InitialCondition {
    pub kind: InitialKind,
    pub k_star_bound: f64,
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            InitialKind::Deterministic(v) => write!(f, "InitialCondition::Deterministic({v:?})"),
            InitialKind::Sampled(_) => write!(f, "InitialCondition::Sampled(K* = {})", self.k_star_bound),
        }
    }
}

impl InitialCondition {
    pub fn fixed(value: Vec<f64>) -> Self {
        let k = norm2(&value);
        InitialCondition {
            kind: InitialKind::Deterministic(value),
            k_star_bound: k,
        }
    }

    pub fn sampled(k_star_bound: f64, sampler: impl Fn(&WienerPath) -> Vec<f64> + Send + Sync + 'static) -> Self {
        InitialCondition {
            kind: InitialKind::Sampled(Arc::new(sampler)),
            k_star_bound,
        }
    }

    pub fn value_for(&self, path: &WienerPath) -> Vec<f64> {
        match &self.kind {
            InitialKind::Deterministic(v) => v.clone(),
            InitialKind::Sampled(s) => s(path),
        }
    }

    /// Monte Carlo check of `‖ξ‖₂ ≤ K*` over the given paths.
    pub fn l2_norm_estimate(&self, paths: &[WienerPath]) -> f64 {
        if paths.is_empty() {
            return 0.0;
        }
        let s: f64 = paths
            .iter()
            .map(|p| {
                let v = self.value_for(p);
                v.iter().map(|x| x * x).sum::<f64>()
            })
            .sum();
        (s / paths.len() as f64).sqrt()
    }
}

/// Built-in problems.
pub mod builtin {
    use super::*;

    /// Scalar linear family `dX = aX dt + amp·sin(2πt/τ) dt + cX dW`.
    pub fn linear_scalar(a: f64, c: f64, amplitude: f64, tau: f64) -> SdeProblem {
        let omega = 2.0 * PI / tau;
        SdeProblem {
            name: "linear".into(),
            state_dim: 1,
            noise_dim: 1,
            linear: LinearPart::Constant(DMatrix::from_element(1, 1, a)),
            drift: Arc::new(move |t, _x, out| out[0] = amplitude * (omega * t).sin()),
            diffusion: Arc::new(move |_t, x, out| out[0] = c * x[0]),
            tau,
            constants: Constants::new(0.0, c.abs(), amplitude.abs() * omega, amplitude.abs(), 0.0),
            holder_exponent: 1.0,
            milstein_ready: true,
        }
    }

    /// `dX = -πX dt + sin(πt) dt + X dW`, period 2.
    pub fn example1() -> SdeProblem {
        SdeProblem {
            name: "example1".into(),
            ..linear_scalar(-PI, 1.0, 1.0, 2.0)
        }
    }

    /// A nonlinear variant without a closed-form solution:
    /// `dX = -πX dt + (sin(πt) + ½ sin X) dt + ½X dW`.
    pub fn nonlinear() -> SdeProblem {
        SdeProblem {
            name: "nonlinear".into(),
            state_dim: 1,
            noise_dim: 1,
            linear: LinearPart::Constant(DMatrix::from_element(1, 1, -PI)),
            drift: Arc::new(|t, x, out| out[0] = (PI * t).sin() + 0.5 * x[0].sin()),
            diffusion: Arc::new(|_t, x, out| out[0] = 0.5 * x[0]),
            tau: 2.0,
            constants: Constants::new(0.5, 0.5, PI, 1.0, 0.0),
            holder_exponent: 1.0,
            milstein_ready: true,
        }
    }

    /// Scalar periodic linear part `a(t) = a₀ + cos(2πt/τ)` with forcing
    /// `sin(2πt/τ)` and diffusion `c·x`.
    pub fn mathieu(a0: f64, c: f64, tau: f64) -> SdeProblem {
        let omega = 2.0 * PI / tau;
        SdeProblem {
            name: "mathieu".into(),
            state_dim: 1,
            noise_dim: 1,
            linear: LinearPart::Periodic(Arc::new(move |t| {
                DMatrix::from_element(1, 1, a0 + (omega * t).cos())
            })),
            drift: Arc::new(move |t, _x, out| out[0] = (omega * t).sin()),
            diffusion: Arc::new(move |_t, x, out| out[0] = c * x[0]),
            tau,
            constants: Constants::new(0.0, c.abs(), omega, 1.0, 0.0),
            holder_exponent: 1.0,
            milstein_ready: true,
        }
    }

    /// Damped rotation `A = [[-δ, -ω], [ω, -δ]]` with `ωτ = π/2`: the
    /// monodromy squared is `-e^{-2δτ} I`, which has no real logarithm.
    pub fn rotation() -> SdeProblem {
        let tau = 1.0;
        let omega = PI / 2.0;
        let delta = 0.5;
        SdeProblem {
            name: "rotation".into(),
            state_dim: 2,
            noise_dim: 1,
            linear: LinearPart::Periodic(Arc::new(move |_t| {
                DMatrix::from_row_slice(2, 2, &[-delta, -omega, omega, -delta])
            })),
            drift: Arc::new(|_t, _x, out| out.fill(0.0)),
            diffusion: Arc::new(|_t, _x, out| out.fill(0.0)),
            tau,
            constants: Constants::new(0.0, 0.0, 0.0, 0.0, 0.0),
            holder_exponent: 1.0,
            milstein_ready: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, beta1: f64, beta2: f64) -> SdeProblem {
        let mut p = builtin::linear_scalar(a, 0.0, 1.0, 2.0);
        p.constants.beta1 = beta1;
        p.constants.beta2 = beta2;
        p
    }

    #[test]
    fn example_one_passes() {
        let r = validate(&builtin::example1()).unwrap();
        assert_eq!(r.lambda1, -PI);
        assert!((r.margin - (PI - 0.5)).abs() < 1e-15);
        assert!((r.margin - 2.6416).abs() < 1e-4);
        assert_eq!(r.dt_max, 1.0 / PI);
        assert_eq!(r.dt_max * r.rho, 1.0);
        assert!(r.passed());
    }

    #[test]
    fn positive_eigenvalue_fails_condition_a() {
        match validate(&scalar(1.0, 0.0, 0.0)) {
            Err(Error::Condition { condition, .. }) => assert_eq!(condition, "A"),
            other => panic!("expected Condition (A) failure, got {other:?}"),
        }
    }

    #[test]
    fn nonsymmetric_a_fails_condition_a() {
        let mut p = builtin::example1();
        p.state_dim = 2;
        p.linear = LinearPart::Constant(DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -2.0]));
        p.drift = Arc::new(|_, _, o| o.fill(0.0));
        p.diffusion = Arc::new(|_, _, o| o.fill(0.0));
        assert!(matches!(validate(&p), Err(Error::Condition { condition, .. }) if condition == "A"));
    }

    #[test]
    fn negative_margin_fails_condition_one() {
        let p = scalar(-2.9, 1.0, 2.0);
        let r = assess(&p).unwrap();
        assert!((r.margin - -0.1).abs() < 1e-12);
        assert!(!r.passed());
        assert!(matches!(validate(&p), Err(Error::Condition { condition, .. }) if condition == "1"));
    }

    #[test]
    fn wrong_period_is_caught() {
        let mut p = builtin::example1();
        p.tau = 1.5;
        assert!(!assess(&p).unwrap().passed());
    }

    #[test]
    fn alpha_separates_the_interval() {
        let r = validate(&builtin::example1()).unwrap();
        let c = builtin::example1().constants;
        assert!(r.alpha - c.dissipation() >= r.margin / 2.0 - 1e-15);
        assert!(r.lambda1.abs() - r.alpha >= r.margin / 2.0 - 1e-15);
    }

    #[test]
    fn validate_is_pure() {
        let p = builtin::example1();
        assert_eq!(assess(&p).unwrap(), assess(&p).unwrap());
    }

    #[test]
    fn periodic_linear_part_needs_floquet() {
        assert!(matches!(
            validate(&builtin::mathieu(-PI, 0.1, 2.0)),
            Err(Error::Condition { condition, .. }) if condition == "A"
        ));
    }

    #[test]
    fn growth_probe_example_one() {
        let mut p = builtin::example1();
        p.constants.c1 = 1.0;
        p.constants.c2 = 0.0;
        let b = ProbeBox {
            t_min: -2.0,
            t_max: 2.0,
            x_radius: 10.0,
        };
        assert!(linear_growth_probe(&p, b, 500).passed);
    }

    #[test]
    fn growth_probe_catches_quadratic_drift() {
        let mut p = builtin::example1();
        p.drift = Arc::new(|_, x, o| o[0] = x[0] * x[0]);
        p.constants.beta1 = 1.0;
        p.constants.c1 = 1.0;
        let b = ProbeBox {
            t_min: 0.0,
            t_max: 2.0,
            x_radius: 10.0,
        };
        let r = linear_growth_probe(&p, b, 500);
        assert!(!r.passed);
        // x² > |x| + 1 exactly when |x| > (1 + √5)/2.
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        assert!(r.violations.iter().all(|v| v.which == "f" && v.x[0].abs() > golden));
        assert!(r.violations.iter().all(|v| v.x[0].abs() > 1.6));
    }

    #[test]
    fn initial_condition_norm() {
        let ic = InitialCondition::fixed(vec![3.0, 4.0]);
        assert_eq!(ic.k_star_bound, 5.0);
        let p = WienerPath::build(1, 1, 0.1, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(ic.l2_norm_estimate(&[p]), 5.0);
    }
}
