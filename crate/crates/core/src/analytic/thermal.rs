use serde::{Deserialize, Serialize};

use super::bessel::bessel_k0_scaled;
use crate::error::{Error, Result};
use crate::params::DeviceParams;
use crate::units::Constants;

/// Temperature-independent residual relaxation plus a thermal quasiparticle channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    /// Residual relaxation time `T1,ne`, μs.
    pub t1ne: f64,
    pub device: DeviceParams,
}

/// Relaxation rate (μs⁻¹) from thermal quasiparticles at temperature `temp` (K)
/// for a qubit at frequency `omega` (GHz):
///
/// `(16 E_J/πħ)·e^{−Δ/kT}·e^{ħω/2kT}·K0(ħω/2kT)·(1 + e^{−ħω/kT})·|ME_L|²`.
///
/// Evaluated as a sum of logarithms so that `Δ/kT` of order 60 does not underflow
/// before the final exponentiation.
pub fn thermal_rate(temp: f64, device: &DeviceParams, omega: f64) -> Result<f64> {
    if !(temp > 0.0 && temp.is_finite()) {
        return Err(Error::domain(
            "thermal_rate",
            format!("temperature must be positive, got {temp}"),
        ));
    }
    if !(omega > 0.0) {
        return Err(Error::domain(
            "thermal_rate",
            "qubit frequency must be positive",
        ));
    }
    let c = Constants::CODATA;
    let kt = c.thermal_energy(temp);
    let x = omega / (2.0 * kt);
    let prefactor = 16.0 / std::f64::consts::PI * c.rate_scale * device.ej_large;
    let me2 = device.me_large * device.me_large;
    if me2 == 0.0 {
        return Ok(0.0);
    }
    let log_rate = (prefactor * me2).ln() - device.gap / kt
        + bessel_k0_scaled(x)?.ln()
        + (-2.0 * x).exp().ln_1p();
    Ok(log_rate.exp())
}

/// `1/T1 = 1/T1,ne + 1/T1,th`, in μs.
pub fn total_t1(temp: f64, model: &ThermalModel, omega: f64) -> Result<f64> {
    let rate = thermal_rate(temp, &model.device, omega)?;
    Ok(1.0 / (1.0 / model.t1ne + rate))
}
