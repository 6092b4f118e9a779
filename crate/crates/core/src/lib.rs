//! Standard and augmented dynamic mode decomposition for forecasting
//! multivariate time series, with metrics, modal statistics and a
//! randomized experiment harness.

pub mod augmentation;
pub mod dmd;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod modal;
pub mod serial;
pub mod stats;
pub mod synthetic;
pub mod timeseries;

pub use error::{Error, Result};
