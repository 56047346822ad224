//! Boolean delay equation simulator for damage propagation on production
//! networks, with the analytic predictions used to validate it.

pub mod components;
pub mod delays;
pub mod engine;
pub mod error;
pub mod observables;
pub mod rng;
pub mod theory;
pub mod time;
pub mod topology;

pub use error::{Error, Result};
