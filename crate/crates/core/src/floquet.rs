// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Lyapunov–Floquet reduction of a `τ`-periodic linear part.
//!
//! For `ẋ = A(t)x` with fundamental matrix `Φ`, `Φ(0) = I`, the monodromy is
//! `C = Φ(τ)`. A real `B` with `e^{2Bτ} = C²` exists when `C²` has no
//! eigenvalue on the closed negative real axis, and `S(t) = Φ(t)e^{-Bt}` is
//! real and `2τ`-periodic. Substituting `X = S(t)Z` turns
//!
//! ```text
//! dX = [A(t)X + f(t, X)] dt + g(t, X) dW
//! ```
//!
//! into `dZ = [BZ + S⁻¹f(t, SZ)] dt + S⁻¹g(t, SZ) dW`, a problem with constant
//! linear part and period `2τ`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::{json, Value};

use crate::error::{integral, Error, Result};
use crate::linalg::{expm, is_symmetric, logm, spectral_norm};
use crate::model::{self, Constants, LinearPart, SdeProblem};
use crate::schemes::Trajectory;

const PERIODICITY_PROBES: usize = 16;
const PERIODICITY_TOL: f64 = 1e-10;
const B_SYMMETRY_TOL: f64 = 1e-10;
/// Times within this fraction of `h` of a grid node use the node directly.
const NODE_TOL: f64 = 1e-7;

/// Fundamental matrix, monodromy, logarithm and transformation matrices on
/// the grid `t_j = j·h`, `j = 0..=2τ/h`.
#[derive(Debug, Clone)]
pub struct FloquetData {
    pub tau: f64,
    pub h: f64,
    pub dim: usize,
    pub phi_grid: Vec<DMatrix<f64>>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub s_grid: Vec<DMatrix<f64>>,
    pub s_inv_grid: Vec<DMatrix<f64>>,
    /// `max_j ‖S(t_j)⁻¹‖₂ ‖S(t_j)‖₂`: the pointwise condition number that
    /// bounds the Lipschitz constants of the transformed coefficients.
    pub gamma: f64,
    /// `max_j ‖S(t_j)⁻¹‖₂ · max_j ‖S(t_j)‖₂`.
    pub gamma_uniform: f64,
    /// `‖e^{2Bτ} - C²‖_F / ‖C²‖_F`.
    pub log_residual: f64,
}

/// Classical RK4 for `Φ' = A(t)Φ`, `Φ(0) = I`, on `[0, 2τ]` with step `h`.
pub fn fundamental_matrix(a_of_t: &dyn Fn(f64) -> DMatrix<f64>, tau: f64, h: f64) -> Result<Vec<DMatrix<f64>>> {
    if !(tau > 0.0 && h > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("need τ > 0 and h > 0, got τ = {tau}, h = {h}")));
    }
    let per_period = integral(tau / h)
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::GridAlignment(format!("h = {h} does not divide τ = {tau}")))?;
    let a0 = a_of_t(0.0);
    let m = a0.nrows();
    if m == 0 || a0.ncols() != m {
        return Err(Error::Domain(format!("A(t) is {}x{}", a0.nrows(), a0.ncols())));
    }
    check_periodic(a_of_t, tau)?;

    let n = 2 * per_period as usize;
    let mut grid = Vec::with_capacity(n + 1);
    let mut phi = DMatrix::<f64>::identity(m, m);
    grid.push(phi.clone());
    for j in 0..n {
        let t = j as f64 * h;
        let a_mid = a_of_t(t + 0.5 * h);
        let k1 = a_of_t(t) * &phi;
        let k2 = &a_mid * (&phi + &k1 * (0.5 * h));
        let k3 = &a_mid * (&phi + &k2 * (0.5 * h));
        let k4 = a_of_t(t + h) * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        grid.push(phi.clone());
    }
    Ok(grid)
}

fn check_periodic(a_of_t: &dyn Fn(f64) -> DMatrix<f64>, tau: f64) -> Result<()> {
    for i in 0..PERIODICITY_PROBES {
        let t = tau * (i as f64 + 0.37) / PERIODICITY_PROBES as f64;
        let (a, b) = (a_of_t(t), a_of_t(t + tau));
        let defect = (&a - &b).abs().max();
        if defect > PERIODICITY_TOL * a.abs().max().max(1.0) {
            return Err(Error::condition(
                "A",
                format!("A(t) is not τ-periodic: |A(t+τ) - A(t)| = {defect:e} at t = {t}"),
            ));
        }
    }
    Ok(())
}

/// `C = Φ(τ)Φ(0)⁻¹` from a grid with `per_period` steps per period.
pub fn monodromy(phi_grid: &[DMatrix<f64>], per_period: usize) -> Result<DMatrix<f64>> {
    if phi_grid.len() <= per_period {
        return Err(Error::Extent(format!(
            "grid of {} nodes does not reach node {per_period}",
            phi_grid.len()
        )));
    }
    let inv0 = phi_grid[0]
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalRank("Φ(0) is singular".into()))?;
    let c = &phi_grid[per_period] * inv0;
    let sv = c.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo.is_finite() && hi.is_finite()) || lo <= 1e-13 * hi {
        return Err(Error::NumericalRank(format!(
            "monodromy is numerically singular (singular values {lo:e} .. {hi:e})"
        )));
    }
    Ok(c)
}

/// `B = log(C²) / 2τ`.
pub fn real_log_b(c: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    Ok(logm(&(c * c))? / (2.0 * tau))
}

fn norm2(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        a[(0, 0)].abs()
    } else {
        spectral_norm(a)
    }
}

impl FloquetData {
    pub fn compute(a_of_t: &dyn Fn(f64) -> DMatrix<f64>, tau: f64, h: f64) -> Result<Self> {
        let phi_grid = fundamental_matrix(a_of_t, tau, h)?;
        let n = phi_grid.len() - 1;
        let c = monodromy(&phi_grid, n / 2)?;
        let b = real_log_b(&c, tau)?;
        let c2 = &c * &c;
        let log_residual = (expm(&(&b * (2.0 * tau))) - &c2).norm() / c2.norm();

        let mut s_grid = Vec::with_capacity(n + 1);
        let mut s_inv_grid = Vec::with_capacity(n + 1);
        let (mut gamma, mut sup_s, mut sup_inv) = (0.0f64, 0.0f64, 0.0f64);
        for (j, phi) in phi_grid.iter().enumerate() {
            let s = phi * expm(&(&b * -(j as f64 * h)));
            let s_inv = s
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NumericalRank(format!("S(t) singular at node {j}")))?;
            let (ns, ni) = (norm2(&s), norm2(&s_inv));
            gamma = gamma.max(ns * ni);
            sup_s = sup_s.max(ns);
            sup_inv = sup_inv.max(ni);
            s_grid.push(s);
            s_inv_grid.push(s_inv);
        }
        Ok(FloquetData {
            tau,
            h,
            dim: c.nrows(),
            phi_grid,
            c,
            b,
            s_grid,
            s_inv_grid,
            gamma,
            gamma_uniform: sup_s * sup_inv,
            log_residual,
        })
    }

    /// For a problem with a (periodic or constant) linear part.
    pub fn for_problem(problem: &SdeProblem, h: f64) -> Result<Self> {
        let linear = problem.linear.clone();
        Self::compute(&move |t| linear.at(t), problem.tau, h)
    }

    /// Number of grid steps over `[0, 2τ]`.
    pub fn steps(&self) -> usize {
        self.s_grid.len() - 1
    }

    pub fn time_of(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// `max |S(2τ) - S(0)|`.
    pub fn s_period_defect(&self) -> f64 {
        (&self.s_grid[self.steps()] - &self.s_grid[0]).abs().max()
    }

    /// Grid node for `t` reduced modulo `2τ`, if `t` lies on the grid.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let u = t.rem_euclid(2.0 * self.tau) / self.h;
        let j = u.round();
        ((u - j).abs() <= NODE_TOL).then(|| j as usize % self.steps())
    }

    /// Interpolation stencil for `t`: the node itself, or cubic Lagrange
    /// weights on the four surrounding nodes (periodically wrapped).
    fn stencil(&self, t: f64) -> ([usize; 4], [f64; 4], usize) {
        if let Some(j) = self.node_index(t) {
            return ([j, 0, 0, 0], [1.0, 0.0, 0.0, 0.0], 1);
        }
        let n = self.steps() as i64;
        let u = t.rem_euclid(2.0 * self.tau) / self.h;
        let base = u.floor();
        let x = u - base;
        let base = base as i64;
        let idx = [-1, 0, 1, 2].map(|o| (base + o).rem_euclid(n) as usize);
        let w = [
            -x * (x - 1.0) * (x - 2.0) / 6.0,
            (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
            -(x + 1.0) * x * (x - 2.0) / 2.0,
            (x + 1.0) * x * (x - 1.0) / 6.0,
        ];
        (idx, w, 4)
    }

    fn interpolate(&self, grid: &[DMatrix<f64>], t: f64) -> DMatrix<f64> {
        let (idx, w, k) = self.stencil(t);
        let mut out = &grid[idx[0]] * w[0];
        for i in 1..k {
            out += &grid[idx[i]] * w[i];
        }
        out
    }

    /// `S(t)`, nearest node on the grid, cubic interpolation off it.
    pub fn s_at(&self, t: f64) -> DMatrix<f64> {
        self.interpolate(&self.s_grid, t)
    }

    pub fn s_inv_at(&self, t: f64) -> DMatrix<f64> {
        self.interpolate(&self.s_inv_grid, t)
    }

    /// `out = M(t) · v` with `v` row-major `m × cols` and `M` from `grid`.
    fn apply(&self, grid: &[DMatrix<f64>], t: f64, v: &[f64], cols: usize, out: &mut [f64]) {
        let (idx, w, k) = self.stencil(t);
        let m = self.dim;
        out.fill(0.0);
        for s in 0..k {
            let mat = &grid[idx[s]];
            for i in 0..m {
                for l in 0..m {
                    let a = w[s] * mat[(i, l)];
                    for c in 0..cols {
                        out[i * cols + c] += a * v[l * cols + c];
                    }
                }
            }
        }
    }

    /// JSON export with row-major matrices. Grids are included on request.
    pub fn to_json(&self, include_grids: bool) -> Value {
        let mut v = json!({
            "tau": self.tau,
            "h": self.h,
            "dim": self.dim,
            "steps": self.steps(),
            "C": rows(&self.c),
            "B": rows(&self.b),
            "gamma": self.gamma,
            "gamma_uniform": self.gamma_uniform,
            "log_residual": self.log_residual,
            "s_period_defect": self.s_period_defect(),
            "b_symmetric": is_symmetric(&self.b, B_SYMMETRY_TOL),
        });
        if include_grids {
            let grid = |g: &[DMatrix<f64>]| g.iter().map(rows).collect::<Vec<_>>();
            v["phi_grid"] = json!(grid(&self.phi_grid));
            v["s_grid"] = json!(grid(&self.s_grid));
            v["s_inv_grid"] = json!(grid(&self.s_inv_grid));
        }
        v
    }
}

fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// The transformed problem and the data needed to map between `X` and `Z`.
#[derive(Clone)]
pub struct LfTransform {
    pub problem: SdeProblem,
    pub floquet: Arc<FloquetData>,
}

impl LfTransform {
    /// `Z = S(t₀)⁻¹ ξ`.
    pub fn map_initial(&self, t0: f64, xi: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; xi.len()];
        self.floquet.apply(&self.floquet.s_inv_grid, t0, xi, 1, &mut z);
        z
    }
}

/// Build the constant-`B` problem. Checks that `B` is symmetric with
/// negative spectrum and that the margin survives inflation of `β₁, β₂`
/// by `γ`.
pub fn lf_transform(problem: &SdeProblem, floquet: Arc<FloquetData>) -> Result<LfTransform> {
    let m = problem.state_dim;
    if floquet.dim != m {
        return Err(Error::Domain(format!(
            "Floquet data has dimension {}, problem has {m}",
            floquet.dim
        )));
    }
    if (floquet.tau - problem.tau).abs() > 1e-12 * problem.tau {
        return Err(Error::Domain(format!(
            "Floquet data has period {}, problem has {}",
            floquet.tau, problem.tau
        )));
    }
    let b = &floquet.b;
    if !is_symmetric(b, B_SYMMETRY_TOL) {
        return Err(Error::condition(
            "A'",
            format!("B is not symmetric: max |B - Bᵀ| = {:e}", (b - b.transpose()).abs().max()),
        ));
    }
    let b_sym = (b + b.transpose()) * 0.5;
    let lambda1 = SymmetricEigen::new(b_sym.clone()).eigenvalues.max();
    if lambda1 >= 0.0 {
        return Err(Error::condition("A'", format!("largest eigenvalue of B is {lambda1}")));
    }
    let k = &problem.constants;
    let gamma = floquet.gamma;
    let (beta1, beta2) = (k.beta1 * gamma, k.beta2 * gamma);
    let margin = lambda1.abs() - beta1 - 0.5 * beta2 * beta2;
    if margin <= 0.0 {
        return Err(Error::condition(
            "1'",
            format!(
                "margin |λ₁(B)| - β₁γ - β₂²γ²/2 = {} - {beta1} - {} = {margin} with γ = {gamma}",
                lambda1.abs(),
                0.5 * beta2 * beta2
            ),
        ));
    }

    let sup_inv = floquet.s_inv_grid.iter().map(norm2).fold(0.0, f64::max);
    let d = problem.noise_dim;
    let (fl, drift) = (floquet.clone(), problem.drift.clone());
    let transformed_drift = Arc::new(move |t: f64, z: &[f64], out: &mut [f64]| {
        let mut x = vec![0.0; z.len()];
        fl.apply(&fl.s_grid, t, z, 1, &mut x);
        let mut f = vec![0.0; z.len()];
        drift(t, &x, &mut f);
        fl.apply(&fl.s_inv_grid, t, &f, 1, out);
    });
    let (fl, diffusion) = (floquet.clone(), problem.diffusion.clone());
    let transformed_diffusion = Arc::new(move |t: f64, z: &[f64], out: &mut [f64]| {
        let mut x = vec![0.0; z.len()];
        fl.apply(&fl.s_grid, t, z, 1, &mut x);
        let mut g = vec![0.0; z.len() * d];
        diffusion(t, &x, &mut g);
        fl.apply(&fl.s_inv_grid, t, &g, d, out);
    });
    let scale = |v: Option<f64>| v.map(|x| x * sup_inv);
    let transformed = SdeProblem {
        name: format!("{}-floquet", problem.name),
        state_dim: m,
        noise_dim: d,
        linear: LinearPart::Constant(b_sym),
        drift: transformed_drift,
        diffusion: transformed_diffusion,
        tau: 2.0 * problem.tau,
        constants: Constants {
            beta1,
            beta2,
            // Time regularity of S⁻¹f(t, Sz) also picks up S'(t); these
            // offsets are indicative only.
            c0: k.c0 * sup_inv,
            c0_drift: scale(k.c0_drift),
            c0_diffusion: scale(k.c0_diffusion),
            c1: k.c1 * sup_inv,
            c2: k.c2 * sup_inv,
        },
        holder_exponent: problem.holder_exponent,
        milstein_ready: problem.milstein_ready,
    };
    model::validate(&transformed)?;
    Ok(LfTransform {
        problem: transformed,
        floquet,
    })
}

fn map_with(floquet: &FloquetData, grid: &[DMatrix<f64>], traj: &Trajectory) -> Result<Trajectory> {
    let m = traj.state_dim;
    if m != floquet.dim {
        return Err(Error::Domain(format!(
            "trajectory has dimension {m}, Floquet data {}",
            floquet.dim
        )));
    }
    let mut states = vec![0.0; traj.states.len()];
    for (i, t) in traj.times.iter().enumerate() {
        let j = floquet.node_index(*t).ok_or_else(|| {
            Error::GridAlignment(format!("t = {t} is not a node of the Floquet grid h = {}", floquet.h))
        })?;
        let mat = &grid[j];
        let z = traj.state(i);
        for r in 0..m {
            states[i * m + r] = (0..m).map(|c| mat[(r, c)] * z[c]).sum();
        }
    }
    Ok(Trajectory {
        states,
        ..traj.clone()
    })
}

/// `X(t) = S(t) Z(t)` at every node of a transformed-problem trajectory.
pub fn map_back(floquet: &FloquetData, z: &Trajectory) -> Result<Trajectory> {
    map_with(floquet, &floquet.s_grid, z)
}

/// `Z(t) = S(t)⁻¹ X(t)`, the inverse of [`map_back`].
pub fn map_forward(floquet: &FloquetData, x: &Trajectory) -> Result<Trajectory> {
    map_with(floquet, &floquet.s_inv_grid, x)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::model::builtin;
    use crate::schemes::{SchemeConfig, SchemeKind};

    fn cosine(a0: f64, tau: f64) -> impl Fn(f64) -> DMatrix<f64> {
        move |t| DMatrix::from_element(1, 1, a0 + (2.0 * PI * t / tau).cos())
    }

    fn cosine_phi(a0: f64, tau: f64, t: f64) -> f64 {
        (a0 * t + tau / (2.0 * PI) * (2.0 * PI * t / tau).sin()).exp()
    }

    #[test]
    fn constant_matrix_gives_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, -2.0]);
        let a2 = a.clone();
        let grid = fundamental_matrix(&move |_| a2.clone(), 1.0, 1e-3).unwrap();
        let eig = SymmetricEigen::new(a.clone());
        for j in [0, 250, 1000, 2000] {
            let t = j as f64 * 1e-3;
            let oracle = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp()))
                * eig.eigenvectors.transpose();
            assert!((&grid[j] - oracle).abs().max() < 1e-8);
        }
    }

    #[test]
    fn scalar_cosine_closed_form_and_order() {
        let (a0, tau) = (-1.0, 1.0);
        let err = |h: f64| {
            let grid = fundamental_matrix(&cosine(a0, tau), tau, h).unwrap();
            grid.iter()
                .enumerate()
                .map(|(j, p)| (p[(0, 0)] - cosine_phi(a0, tau, j as f64 * h)).abs())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(tau / 20.0), err(tau / 40.0));
        assert!(coarse < 1e-5);
        let ratio = coarse / fine;
        assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn cosine_monodromy_and_log() {
        let (a0, tau) = (-0.7, 2.0);
        let data = FloquetData::compute(&cosine(a0, tau), tau, tau / 1000.0).unwrap();
        assert!((data.c[(0, 0)] - (a0 * tau).exp()).abs() < 1e-12);
        assert!((data.b[(0, 0)] - a0).abs() < 1e-10);
        assert!(data.log_residual <= 1e-10);
        assert!(data.s_period_defect() < 1e-8);
        // S(t) = exp((τ/2π) sin(2πt/τ)); pointwise γ is 1, uniform γ is e^{τ/π}
        assert!((data.gamma - 1.0).abs() < 1e-12);
        assert!((data.gamma_uniform - (tau / PI).exp()).abs() < 1e-6);
    }

    #[test]
    fn cocycle_and_liouville() {
        let a_of_t = |t: f64| {
            DMatrix::from_row_slice(
                2,
                2,
                &[-1.0 + 0.5 * (2.0 * PI * t).cos(), 1.0, -0.3, -2.0 + (2.0 * PI * t).sin()],
            )
        };
        let grid = fundamental_matrix(&a_of_t, 1.0, 1e-3).unwrap();
        let c = monodromy(&grid, 1000).unwrap();
        for j in (0..=1000).step_by(125) {
            assert!((&grid[j + 1000] - &grid[j] * &c).abs().max() < 1e-7);
        }
        // ∫₀¹ tr A = -3
        assert!((c.determinant() - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rotation_has_no_real_log() {
        let p = builtin::rotation();
        assert!(matches!(
            FloquetData::for_problem(&p, 1e-3),
            Err(Error::LogarithmExistence { .. })
        ));
    }

    #[test]
    fn grid_must_divide_period() {
        assert!(matches!(
            fundamental_matrix(&cosine(-1.0, 1.0), 1.0, 0.3),
            Err(Error::GridAlignment(_))
        ));
    }

    #[test]
    fn aperiodic_matrix_rejected() {
        let a = |t: f64| DMatrix::from_element(1, 1, -1.0 + t);
        assert!(matches!(fundamental_matrix(&a, 1.0, 0.01), Err(Error::Condition { .. })));
    }

    #[test]
    fn cubic_interpolation_off_grid() {
        let (a0, tau) = (-1.0, 1.0);
        let data = FloquetData::compute(&cosine(a0, tau), tau, 1e-3).unwrap();
        for t in [0.00037, 0.5123, 1.9999, -0.25031, 7.1234] {
            let exact = (tau / (2.0 * PI) * (2.0 * PI * t / tau).sin()).exp();
            assert!((data.s_at(t)[(0, 0)] - exact).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn constant_problem_transform_is_identity() {
        let p = builtin::example1();
        let data = Arc::new(FloquetData::for_problem(&p, 1e-3).unwrap());
        assert!((data.b[(0, 0)] + PI).abs() < 1e-9);
        for s in &data.s_grid {
            assert!((s[(0, 0)] - 1.0).abs() < 1e-9);
        }
        let lf = lf_transform(&p, data).unwrap();
        assert_eq!(lf.problem.tau, 4.0);
        let f = lf.problem.eval_drift(0.3, &[1.5])[0];
        let g = lf.problem.eval_diffusion(0.3, &[1.5])[0];
        assert!((f - p.eval_drift(0.3, &[1.5])[0]).abs() < 1e-9);
        assert!((g - 1.5).abs() < 1e-9);
    }

    #[test]
    fn inflated_margin_checked() {
        // β₂ = 1.9 gives margin |a₀| - β₂²/2 < 0
        let p = builtin::mathieu(-1.5, 1.9, 1.0);
        let data = Arc::new(FloquetData::for_problem(&p, 1e-3).unwrap());
        match lf_transform(&p, data) {
            Err(Error::Condition { condition, .. }) => assert_eq!(condition, "1'"),
            other => panic!("expected a Condition (1') error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn map_back_and_forward_are_inverse() {
        let (a0, tau) = (-1.0, 1.0);
        let data = FloquetData::compute(&cosine(a0, tau), tau, 1e-2).unwrap();
        let scheme = SchemeConfig::new(SchemeKind::EulerMaruyama, 0.02, 0.01).unwrap();
        let z = Trajectory {
            times: vec![-3.0, -2.98, 0.5, 1.26],
            states: vec![1.0, -2.0, 0.25, 3.5],
            state_dim: 1,
            scheme,
            seed: 0,
        };
        let x = map_back(&data, &z).unwrap();
        for (i, t) in z.times.iter().enumerate() {
            let s = (tau / (2.0 * PI) * (2.0 * PI * t / tau).sin()).exp();
            // RK4 at h = 0.01 is accurate to about h⁴
            assert!((x.states[i] - s * z.states[i]).abs() < 1e-7);
        }
        let back = map_forward(&data, &x).unwrap();
        for (u, v) in back.states.iter().zip(&z.states) {
            assert!((u - v).abs() < 1e-10);
        }
        let off = Trajectory {
            times: vec![0.005],
            ..z
        };
        assert!(matches!(map_back(&data, &off), Err(Error::GridAlignment(_))));
    }

    #[test]
    fn json_export_is_row_major() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -3.0]);
        let a2 = a.clone();
        let data = FloquetData::compute(&move |_| a2.clone(), 0.5, 0.01).unwrap();
        let v = data.to_json(false);
        assert!((v["B"][0][1].as_f64().unwrap() - 0.2).abs() < 1e-7, "{}", v["B"]);
        assert!(v.get("phi_grid").is_none());
        assert_eq!(data.to_json(true)["s_grid"].as_array().unwrap().len(), 101);
    }
}
