// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a flat TOML file. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use rpsim_core::model::builtin;
use rpsim_core::oracle::LinearScalarProblem;
use rpsim_core::{SchemeKind, SdeProblem};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Example1,
    Linear,
    Nonlinear,
    Mathieu,
    Rotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_problem")]
    pub problem: ProblemName,
    /// `linear`: the coefficient of `X dt`; `mathieu`: the mean `a₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Diffusion coefficient of `X dW` (`linear`, `mathieu`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Forcing amplitude (`linear`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Period (`linear`, `mathieu`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,

    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Wiener path resolution; defaults to `dt`, or to the smallest step of
    /// `dt_list` for studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fine: Option<f64>,
    #[serde(default)]
    pub linear_in_fractional_step: bool,

    /// Explicit seeds; otherwise `base_seed .. base_seed + count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_count")]
    pub count: u64,

    #[serde(default)]
    pub r: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Initial value; defaults to 0.5 in every coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,

    /// Step sizes for `converge` and `measure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_list: Option<Vec<f64>>,
    /// Pull-back depth for studies; defaults to `k_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Truncation window `T` of the exact oracle.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    /// Surrogate-truth step for problems without an oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    #[serde(default = "default_reference_scheme")]
    pub reference_scheme: SchemeKind,

    /// Diagnostic grid `0, t_step, …, t_end`; defaults to `2τ` and `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_step: Option<f64>,
    /// Shifted-pair window; defaults to `-k_max τ`, `0` and `-τ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_from: Option<f64>,
    /// Lower end of the generated noise window; defaults to what the
    /// command needs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_start: Option<f64>,

    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_bootstrap_seed")]
    pub bootstrap_seed: u64,

    /// Floquet grid step; defaults to `dt_fine`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floquet_h: Option<f64>,
    /// Include the full Φ, S, S⁻¹ grids in `floquet.json`.
    #[serde(default)]
    pub floquet_grids: bool,
}

fn default_problem() -> ProblemName {
    ProblemName::Example1
}
fn default_scheme() -> SchemeKind {
    SchemeKind::EulerMaruyama
}
fn default_reference_scheme() -> SchemeKind {
    SchemeKind::ModifiedMilstein
}
fn default_dt() -> f64 {
    0.01
}
fn default_count() -> u64 {
    100
}
fn default_k_max() -> usize {
    3
}
fn default_tol() -> f64 {
    1e-3
}
fn default_truncation() -> f64 {
    6.0
}
fn default_samples() -> u64 {
    1000
}
fn default_bootstrap() -> usize {
    500
}
fn default_bootstrap_seed() -> u64 {
    2024
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn seeds(&self, offset: u64) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.iter().map(|v| v + offset).collect(),
            None => (0..self.count).map(|i| self.base_seed + offset + i).collect(),
        }
    }

    fn reject_overrides(&self) -> Result<(), CliError> {
        if self.a.is_some() || self.c.is_some() || self.amplitude.is_some() || self.tau.is_some() {
            return Err(CliError::Config(format!(
                "problem {:?} has fixed coefficients; a, c, amplitude and tau apply to \"linear\" and \"mathieu\"",
                self.problem
            )));
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<SdeProblem, CliError> {
        Ok(match self.problem {
            ProblemName::Example1 => {
                self.reject_overrides()?;
                builtin::example1()
            }
            ProblemName::Nonlinear => {
                self.reject_overrides()?;
                builtin::nonlinear()
            }
            ProblemName::Rotation => {
                self.reject_overrides()?;
                builtin::rotation()
            }
            ProblemName::Linear => builtin::linear_scalar(
                self.a.unwrap_or(-PI),
                self.c.unwrap_or(1.0),
                self.amplitude.unwrap_or(1.0),
                self.tau.unwrap_or(2.0),
            ),
            ProblemName::Mathieu => {
                if self.amplitude.is_some() {
                    return Err(CliError::Config("amplitude does not apply to \"mathieu\"".into()));
                }
                builtin::mathieu(self.a.unwrap_or(-1.0), self.c.unwrap_or(0.1), self.tau.unwrap_or(1.0))
            }
        })
    }

    /// The exact oracle, for the scalar linear family.
    pub fn oracle(&self) -> Option<LinearScalarProblem> {
        match self.problem {
            ProblemName::Example1 => Some(LinearScalarProblem::example1()),
            ProblemName::Linear => Some(LinearScalarProblem::sine(
                self.a.unwrap_or(-PI),
                self.c.unwrap_or(1.0),
                self.amplitude.unwrap_or(1.0),
                self.tau.unwrap_or(2.0),
            )),
            _ => None,
        }
    }

    pub fn xi(&self, dim: usize) -> Result<Vec<f64>, CliError> {
        match &self.xi {
            None => Ok(vec![0.5; dim]),
            Some(v) if v.len() == dim => Ok(v.clone()),
            Some(v) => Err(CliError::Config(format!("xi has {} entries, the problem has dimension {dim}", v.len()))),
        }
    }

    pub fn dt_list(&self) -> Result<Vec<f64>, CliError> {
        let list = self
            .dt_list
            .clone()
            .ok_or_else(|| CliError::Config("dt_list is required for this command".into()))?;
        if list.len() < 3 {
            return Err(CliError::Config(format!(
                "dt_list has {} entries; at least 3 are needed for an order fit",
                list.len()
            )));
        }
        Ok(list)
    }

    /// `dt_fine`, defaulting to the smallest step in use.
    pub fn dt_fine_for(&self, steps: &[f64]) -> f64 {
        self.dt_fine
            .unwrap_or_else(|| steps.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(self.k_max)
    }
}
