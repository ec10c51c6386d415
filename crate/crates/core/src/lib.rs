//! Simulation and analysis of quasiparticle-limited qubit relaxation.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod error;
pub mod fitting;
pub mod io;
pub mod master_eq;
pub mod montecarlo;
pub mod params;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
pub use params::{
    ArrivalEnergy, BathParams, DecayParams, DecayTrace, DeviceParams, MatrixElementTable,
    PulseSequence,
};
pub use units::{nu, Constants};
