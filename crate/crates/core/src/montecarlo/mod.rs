//! Event-driven Monte Carlo of a qubit coupled to a fluctuating quasiparticle bath.

mod experiments;
mod kernel;
mod protocol;

pub use experiments::{
    pump_scan, recovery_experiment, PumpPoint, RecoveryPoint, RecoveryResult, Setup,
};
pub use kernel::{step, Kernel, Quasiparticle, TrialState, DEFAULT_QP_CAP};
pub use protocol::{
    run_protocol, run_protocol_with, Estimate, NqpSample, ProbeStats, ProtocolResult, RunStats,
    SimOptions,
};
