use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DeviceParams;

/// Qubit frequency and single-quasiparticle relaxation time at a flux bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    /// `Φ/Φ0 − 1/2`.
    pub f: f64,
    /// GHz.
    pub omega_f: f64,
    /// μs.
    pub t1qp_f: f64,
    /// The matrix-element table was clamped at this bias.
    pub clamped: bool,
}

/// `ω(f) = √(ω0² + (ε·f)²)` with `ε = 2·I_p·Φ0/h`.
pub fn qubit_freq(f: f64, device: &DeviceParams) -> f64 {
    device.omega0.hypot(device.eps_slope * f)
}

/// `T̃1qp(f)` from `1/T̃1qp(f) = (1/T̃1qp(0))·√(ω0/ω(f))·(1 + α·|ME_s(f)|²/|ME_L|²)`.
pub fn t1qp_flux(f: f64, t1qp0: f64, device: &DeviceParams) -> Result<FluxPoint> {
    if !(t1qp0 > 0.0) {
        return Err(Error::domain("t1qp_flux", "t1qp0 must be positive"));
    }
    if !(device.me_large > 0.0) {
        return Err(Error::domain(
            "t1qp_flux",
            "large-junction matrix element must be positive",
        ));
    }
    let omega_f = qubit_freq(f, device);
    let (me_small, clamped) = device.me_small_table.lookup(f);
    let ratio = me_small / device.me_large;
    let bracket = 1.0 + device.alpha * ratio * ratio;
    let freq = (device.omega0 / omega_f).sqrt();
    Ok(FluxPoint {
        f,
        omega_f,
        t1qp_f: t1qp0 / (freq * bracket),
        clamped,
    })
}
