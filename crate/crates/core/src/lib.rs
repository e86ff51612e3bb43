// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Robust quantum gate pulse design.
//!
//! The expected gate infidelity under quasi-static parameter uncertainty is
//! estimated on a sampling set (Smolyak sparse grid, dense tensor grid or
//! Monte Carlo batch) and minimized over pulse parameters with gradient
//! methods.

pub mod drivers;
pub mod error;
pub mod objective;
pub mod optimize;
pub mod pulses;
pub mod qdyn;
pub mod quadrature;
pub mod sparsegrid;

pub use error::{Error, Result};
