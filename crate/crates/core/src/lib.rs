//! Two-way TOA localization and clock synchronization for a moving user
//! device whose clock has both offset and drift.
//!
//! The crate is organised bottom-up: [`linalg`] supplies the small dense
//! matrix kernel, [`scenario`] and [`measurement`] describe the physical
//! setup and its observations, [`estimator`] solves for position and clock,
//! [`analysis`] evaluates Fisher information and bias predictors, and
//! [`montecarlo`] runs the sweep experiments.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod measurement;
pub mod montecarlo;
pub mod scenario;

pub use error::{Error, Result};
pub use estimator::{solve, EstimateReport, Mode, ParamVector, SolverConfig, Termination};
pub use measurement::ToaMeasurementSet;
pub use scenario::{AnchorSet, NoiseSpec, ResponseSchedule, Scenario, UdState, SPEED_OF_LIGHT};
