// SPDX-License-Identifier: MIT OR Apache-2.0

//! GAN estimation of stationary multivariate time series and GAN-driven
//! single change-point detection.
//!
//! The modules build on each other: [`nn`] holds the MLPs, Adam and the
//! Lipschitz projection; [`timeseries`] simulates VAR processes and runs the
//! dependence diagnostics; [`gan`] trains a generator against a
//! budget-constrained critic; [`metrics`] computes Wasserstein-1 distances;
//! [`cpd`] runs the block/window detector on a trained model.

pub mod cpd;
pub mod error;
pub mod gan;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod presets;
pub mod rng;
pub mod timeseries;

pub use error::{Error, Result};
