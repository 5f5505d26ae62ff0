//! Scenario files, logs, headless runner and live service for the
//! omniteleop simulator. The physics lives in [`omniteleop_core`].

pub mod config;
pub mod error;
pub mod log;
pub mod plot;
pub mod protocol;
pub mod runner;
pub mod service;
pub mod session;
pub mod trace;

pub use config::{Experiment, Scenario};
pub use error::{AppError, AppResult};
pub use omniteleop_core as core;
