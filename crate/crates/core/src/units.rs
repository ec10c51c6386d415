//! Unit conventions.
//!
//! Energies are stored as `E/h` in GHz, times in μs and rates in μs⁻¹.
//! Temperatures are given in kelvin and converted with [`Constants::kb_over_h`].

use crate::error::{Error, Result};

/// Fixed conversion factors (2019 SI exact values for `h`, `k_B`, `e`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// `k_B / h` in GHz per kelvin.
    pub kb_over_h: f64,
    /// `1 meV / h` in GHz.
    pub mev_to_ghz: f64,
    /// Converts an energy `E/h` in GHz to the angular rate `E/ħ` in μs⁻¹.
    pub rate_scale: f64,
}

impl Constants {
    pub const CODATA: Constants = Constants {
        kb_over_h: 20.836_619_123_327_57,
        mev_to_ghz: 241.798_924_208_491_8,
        rate_scale: 2.0 * std::f64::consts::PI * 1.0e3,
    };

    /// `k_B T / h` in GHz.
    pub fn thermal_energy(&self, temp_k: f64) -> f64 {
        self.kb_over_h * temp_k
    }

    pub fn mev(&self, energy_mev: f64) -> f64 {
        energy_mev * self.mev_to_ghz
    }

    /// Temperature (K) whose `k_B T` equals `energy` (GHz).
    pub fn ghz_to_kelvin(&self, energy: f64) -> f64 {
        energy / self.kb_over_h
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Normalized BCS density of states `ε/√(ε²−Δ²)` at absolute energy `energy`.
pub fn nu(energy: f64, gap: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::domain(
            "nu",
            format!("gap must be positive, got {gap}"),
        ));
    }
    if !(energy > gap) {
        return Err(Error::domain(
            "nu",
            format!("energy {energy} must exceed the gap {gap} (density of states diverges)"),
        ));
    }
    Ok(energy / ((energy - gap) * (energy + gap)).sqrt())
}

/// Density of states in terms of the excess energy `x = ε − Δ > 0`.
///
/// Equivalent to `nu(gap + x, gap)` without the cancellation in `ε − Δ`.
pub fn nu_excess(excess: f64, gap: f64) -> f64 {
    (gap + excess) / (excess * (2.0 * gap + excess)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_examples() {
        let gap = 56.34;
        let v = nu(2.0 * gap, gap).unwrap();
        assert!((v - 2.0 / 3f64.sqrt()).abs() < 1e-14);

        let v = nu(gap * (1.0 + 1e-6), gap).unwrap();
        // 1/√(2·10⁻⁶) to leading order
        assert!((v - 707.1).abs() < 0.1, "{v}");

        let v = nu(100.0 * gap, gap).unwrap();
        assert!((v - 1.00005).abs() < 1e-6, "{v}");
    }

    #[test]
    fn nu_rejects_energies_at_or_below_gap() {
        assert!(matches!(nu(1.0, 1.0), Err(Error::Domain { .. })));
        assert!(nu(0.5, 1.0).is_err());
        assert!(nu(2.0, 0.0).is_err());
    }

    #[test]
    fn nu_monotone_on_geometric_grid() {
        let gap = 56.34;
        let mut prev = f64::INFINITY;
        for k in 0..1000 {
            // excess energies from 1e-6 Δ to 1e3 Δ
            let x = gap * 1e-6 * 10f64.powf(9.0 * k as f64 / 999.0);
            let v = nu(gap + x, gap).unwrap();
            assert!(v >= 1.0);
            assert!(v < prev, "not strictly decreasing at k={k}");
            prev = v;
            let ve = nu_excess(x, gap);
            assert!((ve - v).abs() <= 1e-9 * v);
        }
    }

    #[test]
    fn conversions_compose() {
        let c = Constants::CODATA;
        let k_per_mev = c.mev_to_ghz / c.kb_over_h;
        assert!((k_per_mev / 11.6045 - 1.0).abs() < 1e-4);
        assert!((c.kb_over_h - 20.8366).abs() < 1e-4);
        assert!((c.mev_to_ghz - 241.799).abs() < 1e-3);
        assert!((c.mev(0.233) - 56.34).abs() < 5e-3);
    }
}
