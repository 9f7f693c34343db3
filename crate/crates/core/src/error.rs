// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by path construction, integration and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid alignment error: {0}")]
    GridAlignment(String),

    #[error("extent error: {0}")]
    Extent(String),

    /// A standing condition on the problem failed. `condition` names it
    /// (`"A"`, `"1"`, `"2"`, `"A'"`, `"1'"`).
    #[error("Condition ({condition}) violated: {detail}")]
    Condition { condition: String, detail: String },

    #[error("divergence at step {step} (t = {time}){}", seed.map(|s| format!(", seed {s}")).unwrap_or_default())]
    Divergence {
        step: usize,
        time: f64,
        seed: Option<u64>,
    },

    /// Some members of an ensemble diverged; `seeds` lists them in order.
    #[error("{} realisation(s) diverged (seeds {seeds:?}); first: {first}", seeds.len())]
    EnsembleDivergence { seeds: Vec<u64>, first: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical rank error: {0}")]
    NumericalRank(String),

    /// The matrix has an eigenvalue on the closed negative real axis, so no
    /// principal real logarithm exists.
    #[error("no real logarithm: eigenvalue {re} + {im}i lies on the closed negative real axis")]
    LogarithmExistence { re: f64, im: f64 },
}

impl Error {
    pub(crate) fn condition(condition: &str, detail: impl Into<String>) -> Self {
        Error::Condition {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }

    /// Attach a seed to a divergence error; other variants pass through.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Error::Divergence { step, time, .. } => Error::Divergence {
                step,
                time,
                seed: Some(seed),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Round `x` to the nearest integer if it lies within the alignment tolerance.
pub(crate) fn integral(x: f64) -> Option<i64> {
    let k = x.round();
    let tol = 1e-9 * x.abs().max(1.0);
    if x.is_finite() && (x - k).abs() <= tol {
        Some(k as i64)
    } else {
        None
    }
}

/// Reduce per-seed results in seed order. Divergences are collected into a
/// single [`Error::EnsembleDivergence`]; any other error is returned as the
/// first one in order.
pub(crate) fn gather<T>(results: Vec<Result<T>>, seeds: impl IntoIterator<Item = u64>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    let mut diverged = Vec::new();
    let mut first = None;
    for (r, seed) in results.into_iter().zip(seeds) {
        match r {
            Ok(v) => out.push(v),
            Err(e @ Error::Divergence { .. }) => {
                diverged.push(seed);
                first.get_or_insert(e.with_seed(seed).to_string());
            }
            Err(e) => return Err(e),
        }
    }
    match first {
        None => Ok(out),
        Some(first) => Err(Error::EnsembleDivergence { seeds: diverged, first }),
    }
}
