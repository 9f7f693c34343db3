// Copyright 2026 The rpsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation of random periodic solutions of semilinear SDEs with
//! periodic forcing.
//!
//! Trajectories are computed by pulling back from `-kτ` along a fixed
//! two-sided Wiener path, using Euler–Maruyama or a derivative-free
//! Milstein scheme. Scalar linear problems have an exact oracle; periodic
//! linear parts are reduced to constant ones by a Floquet transform.

pub mod analysis;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod pullback;
pub mod schemes;

pub use nalgebra;

pub use error::{Error, Result};
pub use model::{Constants, InitialCondition, LinearPart, SdeProblem};
pub use noise::WienerPath;
pub use schemes::{SchemeConfig, SchemeKind, Trajectory};
