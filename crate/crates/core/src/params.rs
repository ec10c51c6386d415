//! Typed physical parameters and their invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::Constants;

/// Tabulated small-junction matrix element `|⟨1|sin(φ_s/2)|0⟩|` versus flux bias.
///
/// Interpolated piecewise-linearly and clamped at the table ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixElementTable(pub Vec<(f64, f64)>);

impl MatrixElementTable {
    /// `{(0, 0), (0.0019, 0.240), (0.004, 0.30)}`. The last point is an
    /// extrapolation guess that only keeps the curve from flattening.
    pub fn default_small_junction() -> Self {
        Self(vec![(0.0, 0.0), (0.0019, 0.240), (0.004, 0.30)])
    }

    /// Largest tabulated flux bias.
    pub fn f_max(&self) -> f64 {
        self.0.last().map_or(0.0, |p| p.0)
    }

    /// Matrix element at `|f|` and whether the lookup was clamped.
    ///
    /// The table is given for `f ≥ 0` and mirrored to negative bias, which
    /// makes the flux dependence even.
    pub fn lookup(&self, f: f64) -> (f64, bool) {
        let x = f.abs();
        let pts = &self.0;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if x < first.0 {
            return (first.1, true);
        }
        if x > last.0 {
            return (last.1, true);
        }
        // first index whose abscissa is >= x
        let hi = pts.partition_point(|p| p.0 < x);
        if hi == 0 {
            return (first.1, false);
        }
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        let w = (x - x0) / (x1 - x0);
        (y0 + w * (y1 - y0), false)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.0.len() < 2 {
            return Err(Error::invalid(path, "table needs at least two points"));
        }
        for (i, &(f, v)) in self.0.iter().enumerate() {
            if !f.is_finite() || !v.is_finite() {
                return Err(Error::invalid(
                    format!("{path}[{i}]"),
                    "entries must be finite",
                ));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    format!("{path}[{i}]"),
                    "matrix element must lie in [0, 1]",
                ));
            }
            if i > 0 {
                let (pf, pv) = self.0[i - 1];
                if f <= pf {
                    return Err(Error::invalid(
                        format!("{path}[{i}]"),
                        "flux values must be strictly increasing",
                    ));
                }
                if v < pv {
                    return Err(Error::invalid(
                        format!("{path}[{i}]"),
                        "table must be monotone",
                    ));
                }
            }
        }
        if self.0[0] != (0.0, 0.0) {
            return Err(Error::invalid(
                format!("{path}[0]"),
                "table must start at (0, 0)",
            ));
        }
        Ok(())
    }
}

/// Qubit and junction constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Qubit frequency at zero flux bias, GHz.
    pub omega0: f64,
    /// `2·I_p·Φ0/h`, GHz per unit flux bias.
    pub eps_slope: f64,
    /// Large-junction Josephson energy, GHz.
    pub ej_large: f64,
    /// Superconducting gap, GHz.
    pub gap: f64,
    /// Large-junction matrix element `|⟨1|sin(φ_L/2)|0⟩|`.
    pub me_large: f64,
    /// Small- to large-junction Josephson energy ratio.
    pub alpha: f64,
    pub me_small_table: MatrixElementTable,
}

impl DeviceParams {
    /// Traditional flux qubit operated at 5.37 GHz.
    ///
    /// `eps_slope` assumes a persistent current of 180 nA.
    pub fn device_a() -> Self {
        Self {
            omega0: 5.37,
            eps_slope: 1123.5,
            ej_large: 210.0,
            gap: Constants::CODATA.mev(0.233),
            me_large: 0.240,
            alpha: 0.54,
            me_small_table: MatrixElementTable::default_small_junction(),
        }
    }

    /// C-shunt flux qubit at 4.7 GHz; other constants borrowed from device A.
    pub fn device_b() -> Self {
        Self {
            omega0: 4.7,
            ..Self::device_a()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "deviceA" => Some(Self::device_a()),
            "deviceB" => Some(Self::device_b()),
            _ => None,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        positive(path, "omega0", self.omega0)?;
        non_negative(path, "eps_slope", self.eps_slope)?;
        positive(path, "ej_large", self.ej_large)?;
        positive(path, "gap", self.gap)?;
        if !(0.0..=1.0).contains(&self.me_large) {
            return Err(Error::invalid(
                join(path, "me_large"),
                "me_large must lie in [0, 1]",
            ));
        }
        non_negative(path, "alpha", self.alpha)?;
        self.me_small_table.validate(&join(path, "me_small_table"))
    }
}

/// The three parameters of the non-exponential decay law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    /// Mean quasiparticle number.
    pub n_avg: f64,
    /// Relaxation time induced by a single quasiparticle, μs.
    pub t1qp: f64,
    /// Residual relaxation time, μs.
    pub t1r: f64,
}

impl DecayParams {
    pub const fn new(n_avg: f64, t1qp: f64, t1r: f64) -> Self {
        Self { n_avg, t1qp, t1r }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        non_negative(path, "n_avg", self.n_avg)?;
        positive(path, "t1qp", self.t1qp)?;
        positive(path, "t1r", self.t1r)
    }
}

/// How arriving quasiparticles draw their excess energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalEnergy {
    /// Every arrival carries exactly `delta_e`.
    #[default]
    Fixed,
    /// Exponentially distributed with mean `delta_e`.
    Exponential,
}

/// Quasiparticle reservoir coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    /// Arrival rate, μs⁻¹.
    pub gamma_in: f64,
    /// Exit rate of a quasiparticle at the characteristic energy, μs⁻¹.
    pub gamma_out: f64,
    /// Characteristic excess energy above the gap, GHz.
    pub delta_e: f64,
    /// Scale exit rates with the density of states and allow excitation.
    pub energy_resolved: bool,
    /// Excitation to relaxation rate ratio for quasiparticles above `ω0`.
    pub excitation_ratio: f64,
    #[serde(default)]
    pub arrival: ArrivalEnergy,
    /// A quasiparticle that relaxes the qubit leaves the qubit region at once
    /// instead of keeping the absorbed energy.
    #[serde(default)]
    pub exit_on_relax: bool,
}

impl BathParams {
    /// Rates from the recovery experiment (`Γ_out⁻¹ = 300 μs`, `Γ_in⁻¹ = 150 μs`)
    /// with a 1.46 GHz (≈ 70 mK) characteristic energy.
    pub fn device_a() -> Self {
        Self {
            gamma_in: 1.0 / 150.0,
            gamma_out: 1.0 / 300.0,
            delta_e: 1.46,
            energy_resolved: true,
            excitation_ratio: 1.0,
            arrival: ArrivalEnergy::Fixed,
            exit_on_relax: false,
        }
    }

    /// Steady-state mean quasiparticle number `Γ_in/Γ_out`.
    pub fn mean_steady(&self) -> f64 {
        self.gamma_in / self.gamma_out
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        non_negative(path, "gamma_in", self.gamma_in)?;
        positive(path, "gamma_out", self.gamma_out)?;
        positive(path, "delta_e", self.delta_e)?;
        non_negative(path, "excitation_ratio", self.excitation_ratio)
    }
}

/// Pump-and-probe pulse protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub n_pulses: u32,
    /// Pulse spacing ΔT, μs.
    pub spacing: f64,
    /// Rotation angle per pump pulse, radians.
    pub theta: f64,
    /// Delay between the last pump pulse and the probe, μs.
    pub probe_delay: f64,
    /// Readout delays after the probe, μs.
    pub readout_grid: Vec<f64>,
    /// Time between trials, μs.
    pub repetition_period: f64,
}

impl PulseSequence {
    /// Probability that a pulse flips the qubit, `sin²(θ/2)`.
    pub fn flip_probability(&self) -> f64 {
        let s = (0.5 * self.theta).sin();
        s * s
    }

    /// Pump pulse times relative to the first pulse, followed by the probe time.
    pub fn pulse_times(&self) -> (Vec<f64>, f64) {
        let pumps: Vec<f64> = (0..self.n_pulses)
            .map(|j| j as f64 * self.spacing)
            .collect();
        let probe = match pumps.last() {
            Some(&t) => t + self.probe_delay,
            None => 0.0,
        };
        (pumps, probe)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.n_pulses > 0 {
            positive(path, "spacing", self.spacing)?;
        } else {
            non_negative(path, "spacing", self.spacing)?;
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid(join(path, "theta"), "theta must be finite"));
        }
        non_negative(path, "probe_delay", self.probe_delay)?;
        let grid = &self.readout_grid;
        let gpath = join(path, "readout_grid");
        if grid.is_empty() {
            return Err(Error::invalid(gpath, "readout_grid must not be empty"));
        }
        if !(grid[0] >= 0.0) {
            return Err(Error::invalid(gpath, "first readout delay must be >= 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                gpath,
                "readout_grid must be strictly increasing",
            ));
        }
        let last = *grid.last().unwrap();
        if !(self.repetition_period > last) {
            return Err(Error::invalid(
                join(path, "repetition_period"),
                "repetition_period must exceed the largest readout delay",
            ));
        }
        Ok(())
    }
}

/// Sampled excited-state population versus readout delay.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecayTrace {
    pub delays: Vec<f64>,
    pub populations: Vec<f64>,
    /// Per-point standard errors; empty when unknown.
    pub stderr: Vec<f64>,
    pub n_trials: Vec<u64>,
}

impl DecayTrace {
    /// A noiseless trace with no error bars.
    pub fn from_samples(delays: Vec<f64>, populations: Vec<f64>) -> Self {
        let n = delays.len();
        Self {
            delays,
            populations,
            stderr: Vec::new(),
            n_trials: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn has_stderr(&self) -> bool {
        !self.stderr.is_empty()
    }

    /// Divides populations and errors by the population at the first delay.
    pub fn normalized(&self) -> Self {
        let p0 = self.populations.first().copied().unwrap_or(1.0);
        if !(p0 > 0.0) {
            return self.clone();
        }
        Self {
            delays: self.delays.clone(),
            populations: self.populations.iter().map(|p| (p / p0).min(1.0)).collect(),
            stderr: self.stderr.iter().map(|s| s / p0).collect(),
            n_trials: self.n_trials.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.delays.len();
        if self.populations.len() != n || self.n_trials.len() != n {
            return Err(Error::invalid("trace", "columns must have equal lengths"));
        }
        if !self.stderr.is_empty() && self.stderr.len() != n {
            return Err(Error::invalid(
                "trace.stderr",
                "stderr must be empty or match delays",
            ));
        }
        if let Some(i) = self
            .populations
            .iter()
            .position(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::invalid(
                format!("trace.populations[{i}]"),
                "population must lie in [0, 1]",
            ));
        }
        if let Some(i) = self.stderr.iter().position(|s| !(*s >= 0.0)) {
            return Err(Error::invalid(
                format!("trace.stderr[{i}]"),
                "stderr must be >= 0",
            ));
        }
        if let Some(i) = self.delays.iter().position(|d| !d.is_finite()) {
            return Err(Error::invalid(
                format!("trace.delays[{i}]"),
                "delay must be finite",
            ));
        }
        Ok(())
    }
}

fn join(path: &str, field: &str) -> String {
    if path.is_empty() {
        field.to_string()
    } else {
        format!("{path}.{field}")
    }
}

fn positive(path: &str, field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            join(path, field),
            format!("{field} must be positive"),
        ))
    }
}

fn non_negative(path: &str, field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            join(path, field),
            format!("{field} must be non-negative"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_decay_params_accepted() {
        let p = DecayParams::new(2.5, 23.0, 55.0);
        p.validate("sim.decay").unwrap();
    }

    #[test]
    fn zero_t1qp_rejected() {
        let err = DecayParams::new(2.5, 0.0, 55.0)
            .validate("sim.decay")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t1qp must be positive"), "{msg}");
        assert!(msg.starts_with("sim.decay.t1qp"), "{msg}");
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let t = MatrixElementTable::default_small_junction();
        assert_eq!(t.lookup(0.0), (0.0, false));
        let (v, c) = t.lookup(0.0019);
        assert!((v - 0.240).abs() < 1e-15 && !c);
        let (v, _) = t.lookup(-0.00095);
        assert!((v - 0.120).abs() < 1e-12);
        assert_eq!(t.lookup(0.01), (0.30, true));
    }

    #[test]
    fn table_must_start_at_origin() {
        let mut d = DeviceParams::device_a();
        d.me_small_table = MatrixElementTable(vec![(0.0, 0.1), (0.002, 0.2)]);
        assert!(d.validate("device").is_err());
    }

    #[test]
    fn pulse_grid_checks() {
        let mut s = PulseSequence {
            n_pulses: 2,
            spacing: 10.0,
            theta: std::f64::consts::PI,
            probe_delay: 10.0,
            readout_grid: vec![0.0, 5.0, 5.0],
            repetition_period: 2000.0,
        };
        assert!(s.validate("pulses").is_err());
        s.readout_grid = vec![0.0, 5.0, 10.0];
        s.validate("pulses").unwrap();
        assert_eq!(s.pulse_times(), (vec![0.0, 10.0], 20.0));
        assert!((s.flip_probability() - 1.0).abs() < 1e-15);
        s.repetition_period = 10.0;
        assert!(s.validate("pulses").is_err());
    }
}
