//! Networks of discrete-time rate neurons coupled by spatially correlated Gaussian
//! weights on a ring: exact simulation, the mean-field limit law, and the
//! large-deviation rate function evaluated on Gaussian candidates.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
mod linalg;
pub mod mean_field;
pub mod model;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod sampling;
pub mod simulation;
pub mod spectral;

pub use error::{Error, Result};
