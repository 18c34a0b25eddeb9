//! Spatial-confounding estimators built on a dense Gaussian-process engine.
//!
//! Everything numeric is generic over [`numerics::Scalar`]; the aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod numerics;
pub mod simgen;
pub mod smoothers;

pub use error::{Error, Result};

pub type Matrix = numerics::Mat<f64>;
pub type Dataset = estimators::Dataset<f64>;
pub type EstimateResult = estimators::EstimateResult<f64>;
pub type KernelSpec = kernels::KernelSpec<f64>;
pub type GpFit = smoothers::GpFit<f64>;
