//! Robust mean estimation with adaptive losses.
//!
//! The crate provides the adaptive robust loss family and its normalizer,
//! a graduated non-convexity solver for the location, likelihood calibration
//! of shape and scale, median-of-blocks estimators built on top of them,
//! data generators, a Monte Carlo benchmark harness and a robust advantage
//! normalizer for group-based policy optimization.

pub mod advantage;
pub mod bench;
pub mod calibration;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod gnc;
pub mod loss;
mod quadrature;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use loss::{LossParams, Shape};
