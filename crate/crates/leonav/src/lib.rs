//! Scenario harness, file formats and command-line front end for the
//! `leonav-core` navigation models.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beacon;
pub mod catalog;
pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod plot;
pub mod replay;
pub mod scenario;

pub use config::ScenarioConfig;
pub use error::HarnessError;
pub use scenario::{sweep, PreparedScenario, SweepResult};
