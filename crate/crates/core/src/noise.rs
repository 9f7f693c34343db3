// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Two-sided Wiener paths on a fine grid.
//!
//! A [`WienerPath`] stores the fine-grid increments of a `d`-dimensional
//! Brownian motion on `[t_min, t_max]`, pinned to zero at an anchor time.
//! Increments above the anchor and below it come from independent ChaCha
//! streams of the same seed, each generated outward from the anchor, so a
//! wider window extends a narrower one without changing shared increments.
//!
//! Every increment is rounded onto the dyadic lattice `2^-40`. Sums of
//! lattice values below `2^13` in magnitude are exact in `f64`, which makes
//! telescoping sums and shift compositions exact rather than
//! tolerance-based.
//!
//! Shifts (`θ_t ω(s) = W(t+s) - W(t)`) are views sharing the same storage.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{integral, Error, Result};

const LATTICE: f64 = 1.0 / (1u64 << 40) as f64;
// Partial sums must stay below 2^13 for exact addition on the lattice.
const EXACT_RANGE: f64 = 4096.0;

const STREAM_RIGHT: u64 = 0;
const STREAM_LEFT: u64 = 1;
const STREAM_AUX_RIGHT: u64 = 2;
const STREAM_AUX_LEFT: u64 = 3;

#[derive(Debug)]
struct PathData {
    increments: Vec<f64>,
    aux: Vec<f64>,
    cum: Vec<f64>,
    aux_cum: Vec<f64>,
}

/// A seeded, two-sided Brownian path on a fine grid.
///
/// Cloning is cheap: the increment storage is shared.
#[derive(Debug, Clone)]
pub struct WienerPath {
    seed: u64,
    dim: usize,
    dt_fine: f64,
    anchor: f64,
    // Storage extent in steps, relative to the storage anchor node.
    n_left: usize,
    n_right: usize,
    // View node k is storage node k + offset.
    offset: i64,
    data: Arc<PathData>,
}

fn quantize(x: f64) -> f64 {
    (x / LATTICE).round() * LATTICE
}

fn draw_side(seed: u64, stream: u64, steps: usize, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..steps * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            quantize(z * scale)
        })
        .collect()
}

/// Assemble storage-ordered increments and node values from the two sides.
/// `left[i]` is the increment of step `-(i+1) -> -i`.
fn assemble(left: Vec<f64>, right: Vec<f64>, n_left: usize, n_right: usize, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut increments = vec![0.0; (n_left + n_right) * dim];
    for i in 0..n_left {
        let dst = (n_left - 1 - i) * dim;
        increments[dst..dst + dim].copy_from_slice(&left[i * dim..(i + 1) * dim]);
    }
    increments[n_left * dim..].copy_from_slice(&right);

    let mut cum = vec![0.0; (n_left + n_right + 1) * dim];
    for node in n_left..n_left + n_right {
        for j in 0..dim {
            cum[(node + 1) * dim + j] = cum[node * dim + j] + increments[node * dim + j];
        }
    }
    for node in (0..n_left).rev() {
        for j in 0..dim {
            cum[node * dim + j] = cum[(node + 1) * dim + j] - increments[node * dim + j];
        }
    }
    if cum.iter().any(|w| w.abs() >= EXACT_RANGE) {
        return Err(Error::Domain(format!(
            "path magnitude exceeds the exact-summation range ±{EXACT_RANGE}; use a shorter window"
        )));
    }
    Ok((increments, cum))
}

impl WienerPath {
    /// Build a path covering `[t_min, t_max]` with `W(anchor) = 0`.
    pub fn build(seed: u64, dim: usize, dt_fine: f64, anchor: f64, t_min: f64, t_max: f64) -> Result<Self> {
        if !(dt_fine > 0.0) || !dt_fine.is_finite() {
            return Err(Error::Domain(format!("dt_fine must be positive, got {dt_fine}")));
        }
        if dim == 0 {
            return Err(Error::Domain("noise dimension must be positive".into()));
        }
        if !(t_min <= anchor && anchor <= t_max) {
            return Err(Error::Domain(format!(
                "anchor {anchor} must lie in [{t_min}, {t_max}]"
            )));
        }
        let n_left = integral((anchor - t_min) / dt_fine).ok_or_else(|| {
            Error::GridAlignment(format!(
                "(anchor - t_min)/dt_fine = {} is not an integer",
                (anchor - t_min) / dt_fine
            ))
        })? as usize;
        let n_right = integral((t_max - anchor) / dt_fine).ok_or_else(|| {
            Error::GridAlignment(format!(
                "(t_max - anchor)/dt_fine = {} is not an integer",
                (t_max - anchor) / dt_fine
            ))
        })? as usize;

        let scale = dt_fine.sqrt();
        let (increments, cum) = assemble(
            draw_side(seed, STREAM_LEFT, n_left, dim, scale),
            draw_side(seed, STREAM_RIGHT, n_right, dim, scale),
            n_left,
            n_right,
            dim,
        )?;
        let (aux, aux_cum) = assemble(
            draw_side(seed, STREAM_AUX_LEFT, n_left, dim, scale),
            draw_side(seed, STREAM_AUX_RIGHT, n_right, dim, scale),
            n_left,
            n_right,
            dim,
        )?;

        Ok(WienerPath {
            seed,
            dim,
            dt_fine,
            anchor,
            n_left,
            n_right,
            offset: 0,
            data: Arc::new(PathData {
                increments,
                aux,
                cum,
                aux_cum,
            }),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Steps available below the anchor of this view.
    pub fn n_left(&self) -> usize {
        (self.n_left as i64 + self.offset) as usize
    }

    /// Steps available above the anchor of this view.
    pub fn n_right(&self) -> usize {
        (self.n_right as i64 - self.offset) as usize
    }

    pub fn t_min(&self) -> f64 {
        self.time_of(-(self.n_left() as i64))
    }

    pub fn t_max(&self) -> f64 {
        self.time_of(self.n_right() as i64)
    }

    /// Fine increments in ascending time, `dim` values per step; entry `i`
    /// covers the step starting at `t_min + i * dt_fine`.
    pub fn increments(&self) -> &[f64] {
        &self.data.increments
    }

    /// The independent auxiliary stream used for `ΔZ`.
    pub fn aux_increments(&self) -> &[f64] {
        &self.data.aux
    }

    /// Absolute time of view node `k`.
    #[inline]
    pub fn time_of(&self, k: i64) -> f64 {
        self.anchor + k as f64 * self.dt_fine
    }

    /// View node index of `t`, checking alignment and extent.
    pub fn node_of(&self, t: f64) -> Result<i64> {
        let k = integral((t - self.anchor) / self.dt_fine).ok_or_else(|| {
            Error::GridAlignment(format!("t = {t} is not on the fine grid (dt_fine = {})", self.dt_fine))
        })?;
        if !self.contains_node(k) {
            return Err(Error::GridAlignment(format!(
                "t = {t} outside path extent [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(k)
    }

    /// Number of fine steps in a time span, if integral.
    pub fn steps_in(&self, span: f64) -> Result<i64> {
        integral(span / self.dt_fine).ok_or_else(|| {
            Error::GridAlignment(format!(
                "span {span} is not a multiple of dt_fine = {}",
                self.dt_fine
            ))
        })
    }

    #[inline]
    pub(crate) fn contains_node(&self, k: i64) -> bool {
        k >= -(self.n_left() as i64) && k <= self.n_right() as i64
    }

    #[inline]
    fn storage_index(&self, k: i64) -> usize {
        (k + self.offset + self.n_left as i64) as usize * self.dim
    }

    /// Un-normalised node value; differences of these are exact increments.
    #[inline]
    pub(crate) fn raw(&self, k: i64, j: usize) -> f64 {
        self.data.cum[self.storage_index(k) + j]
    }

    #[inline]
    pub(crate) fn raw_aux(&self, k: i64, j: usize) -> f64 {
        self.data.aux_cum[self.storage_index(k) + j]
    }

    /// `W(t) - W(anchor)` for this view.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.node_of(t)?;
        Ok((0..self.dim).map(|j| self.raw(k, j) - self.raw(0, j)).collect())
    }

    /// `W(t_start + m dt_fine) - W(t_start)`: the sum of `m` fine increments.
    pub fn coarse_increment(&self, t_start: f64, m: usize) -> Result<Vec<f64>> {
        let (k0, k1) = self.window(t_start, m)?;
        Ok((0..self.dim).map(|j| self.raw(k1, j) - self.raw(k0, j)).collect())
    }

    /// Approximate `ΔZ = ∫∫ dW_u ds` over `[t_start, t_start + m dt_fine]` by
    /// `½Δt(ΔW + ΔV/√3)` with `ΔV` the aggregated auxiliary increment.
    pub fn delta_z(&self, t_start: f64, m: usize) -> Result<Vec<f64>> {
        let (k0, k1) = self.window(t_start, m)?;
        let dt = m as f64 * self.dt_fine;
        Ok((0..self.dim)
            .map(|j| {
                let dw = self.raw(k1, j) - self.raw(k0, j);
                let dv = self.raw_aux(k1, j) - self.raw_aux(k0, j);
                delta_z_from(dt, dw, dv)
            })
            .collect())
    }

    fn window(&self, t_start: f64, m: usize) -> Result<(i64, i64)> {
        if m == 0 {
            return Err(Error::Domain("aggregation factor m must be at least 1".into()));
        }
        let k0 = self.node_of(t_start)?;
        let k1 = k0 + m as i64;
        if !self.contains_node(k1) {
            return Err(Error::GridAlignment(format!(
                "window [{t_start}, {}] leaves the path extent",
                self.time_of(k1)
            )));
        }
        Ok((k0, k1))
    }

    /// The Wiener shift `θ_t` with `t = n_steps * dt_fine`: a view whose
    /// value at `s` is `W(t + s) - W(t)`.
    pub fn shift(&self, n_steps: i64) -> Result<WienerPath> {
        if !self.contains_node(n_steps) {
            return Err(Error::Extent(format!(
                "shift by {n_steps} steps moves the origin outside [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(WienerPath {
            offset: self.offset + n_steps,
            ..self.clone()
        })
    }

    /// [`shift`](Self::shift) by a time that must be a multiple of `dt_fine`.
    pub fn shift_by_time(&self, t: f64) -> Result<WienerPath> {
        let n = integral(t / self.dt_fine).ok_or_else(|| {
            Error::Extent(format!("shift {t} is not a multiple of dt_fine = {}", self.dt_fine))
        })?;
        self.shift(n)
    }
}

#[inline]
pub(crate) fn delta_z_from(dt: f64, dw: f64, dv: f64) -> f64 {
    0.5 * dt * (dw + dv / 3f64.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one_window_has_1200_increments() {
        let p = WienerPath::build(1, 1, 0.01, 0.0, -6.0, 6.0).unwrap();
        assert_eq!(p.increments().len(), 1200);
        assert_eq!(p.aux_increments().len(), 1200);
        assert_eq!(p.n_left(), 600);
        assert_eq!(p.n_right(), 600);
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let a = WienerPath::build(1, 2, 0.01, 0.0, -6.0, 6.0).unwrap();
        let b = WienerPath::build(1, 2, 0.01, 0.0, -6.0, 6.0).unwrap();
        let bits = |p: &WienerPath| p.increments().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = WienerPath::build(2, 2, 0.01, 0.0, -6.0, 6.0).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn wider_window_extends_narrower_one() {
        let a = WienerPath::build(9, 1, 0.01, 0.0, -2.0, 1.0).unwrap();
        let b = WienerPath::build(9, 1, 0.01, 0.0, -4.0, 3.0).unwrap();
        for t in [-2.0, -1.37, 0.0, 0.5, 1.0] {
            assert_eq!(a.value_at(t).unwrap(), b.value_at(t).unwrap());
        }
    }

    #[test]
    fn bad_construction_arguments() {
        assert!(matches!(
            WienerPath::build(1, 1, 0.0, 0.0, -1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            WienerPath::build(1, 1, 0.3, 0.0, -1.0, 1.0),
            Err(Error::GridAlignment(_))
        ));
    }

    #[test]
    fn anchor_and_first_step() {
        let p = WienerPath::build(3, 1, 0.01, 0.0, -1.0, 1.0).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), vec![0.0]);
        assert_eq!(p.value_at(0.01).unwrap(), vec![p.increments()[100]]);
        assert_eq!(p.value_at(-0.01).unwrap(), vec![-p.increments()[99]]);
    }

    #[test]
    fn off_grid_and_out_of_range() {
        let p = WienerPath::build(3, 1, 0.01, 0.0, -1.0, 1.0).unwrap();
        assert!(matches!(p.value_at(0.005), Err(Error::GridAlignment(_))));
        assert!(matches!(p.value_at(1.01), Err(Error::GridAlignment(_))));
        assert!(matches!(p.coarse_increment(0.99, 2), Err(Error::GridAlignment(_))));
        assert!(matches!(p.shift(101), Err(Error::Extent(_))));
    }

    #[test]
    fn coarse_increment_identity_and_telescoping() {
        let p = WienerPath::build(5, 1, 1e-3, 0.0, -1.0, 1.0).unwrap();
        assert_eq!(p.coarse_increment(0.2, 1).unwrap(), vec![p.increments()[1200]]);
        let w0 = p.value_at(0.2).unwrap()[0];
        let w1 = p.value_at(0.21).unwrap()[0];
        assert_eq!(p.coarse_increment(0.2, 10).unwrap()[0], w1 - w0);
    }

    #[test]
    fn zero_noise_gives_zero_delta_z() {
        assert_eq!(delta_z_from(0.01, 0.0, 0.0), 0.0);
    }

    #[test]
    fn shift_is_a_view() {
        let p = WienerPath::build(7, 1, 0.01, 0.0, -3.0, 3.0).unwrap();
        let q = p.shift(-200).unwrap();
        assert!((q.t_min() - -1.0).abs() < 1e-12);
        assert!((q.t_max() - 5.0).abs() < 1e-12);
        let expected = p.value_at(-1.5).unwrap()[0] - p.value_at(-2.0).unwrap()[0];
        assert_eq!(q.value_at(0.5).unwrap()[0], expected);
        assert!(std::ptr::eq(p.increments(), q.increments()));
    }
}
