//! Modelling, switched simulation and power-quality analysis of a
//! grid-interfaced battery back-up supply with a push-pull inverter.

pub mod analysis;
pub mod config;
pub mod error;
pub mod models;
pub mod sstf;
pub mod supervisory;
pub mod switchsim;

pub use error::{Error, Result};
