//! Simulation, parametric estimation and error-state propagation for arrays
//! of stationary MEMS inertial sensors.
//!
//! - [`sensor_model`]: synthetic gyro/accel recordings under a linear bias +
//!   white-noise model, and residuals against stationary ground truth.
//! - [`estimation`]: sample means over time and sensors, variance laws,
//!   Fisher information / CRLB, running-window profiles, KDE, quality ranking
//!   and a stationarity screen.
//! - [`ins_error_model`]: the 15-state error model with closed-form
//!   transition and process-noise matrices, propagation and error ellipsoids.
//! - [`dataio`]: manifest + CSV ingestion, dataset summaries, report writers.
//! - [`cli`]: the `imulab` command-line experiments.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod estimation;
pub mod ins_error_model;
pub mod numeric;
pub mod sensor_model;
pub mod units;

pub use error::{Error, Result};
