//! Navigation core for LEO-aided 9D positioning.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every model and
//! estimator: WGS-84 frames, TLE parsing and a two-body + secular J2
//! propagator, Doppler-rate and range observables, beacon ridge processing
//! and satellite association, strapdown mechanization, a 9-state extended
//! Kalman filter and the matching posterior Cramér-Rao bound recursion.
//! File formats, Monte Carlo orchestration and the CLI live in the `leonav`
//! crate.
#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bound;
pub mod estimation;
pub mod frames;
pub mod fusion;
pub mod inertial;
pub mod metrics;
pub mod noise;
pub mod observables;
pub mod propagate;
pub mod spectral;
pub mod time;
pub mod tle;

pub use nalgebra;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

pub use frames::{EnuFrame, GeodeticPosition};
pub use inertial::{ImuNoiseModel, ImuSample, NavState};
pub use observables::{BeaconCarrier, Measurement, MeasurementKind};
pub use propagate::SatStateEcef;

pub use time::UtcInstant;
pub use tle::{Constellation, TleCatalog, TleRecord};
