//! Multi-horizon wind forecasting with spatio-temporal networks.

pub mod covariates;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
