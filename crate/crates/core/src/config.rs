//! JSON run configuration: loading, defaults, validation and digest.
//!
//! ```json
//! {
//!   "device": { "preset": "deviceA", "gap_mev": 0.233 },
//!   "bath": { "gamma_in": 0.00667 },
//!   "pulses": { "counts": [0, 5, 40] },
//!   "sim": { "n_trials": 20000 },
//!   "fit": { "fix_t1r": 55.0 }
//! }
//! ```
//!
//! Every section and field is optional. Energies may be given in meV with
//! an `_mev` suffix. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::FitOptions;
use crate::montecarlo::SimOptions;
use crate::params::{BathParams, DecayParams, DeviceParams, PulseSequence};
use crate::units::Constants;

const SECTIONS: [&str; 5] = ["device", "bath", "pulses", "sim", "fit"];
const DEVICE_ENERGIES: [&str; 4] = ["omega0", "eps_slope", "ej_large", "gap"];
const BATH_ENERGIES: [&str; 1] = ["delta_e"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulsesConfig {
    pub n_pulses: u32,
    pub spacing: f64,
    pub theta: f64,
    pub probe_delay: f64,
    pub readout_grid: Vec<f64>,
    pub repetition_period: f64,
    /// Pulse counts scanned by `simulate-pump`.
    pub counts: Vec<u32>,
    /// Pump pulses applied before the delayed probe in `recovery`.
    pub recovery_pulses: u32,
    /// Probe delays scanned by `recovery`, μs.
    pub probe_delays: Vec<f64>,
}

impl Default for PulsesConfig {
    fn default() -> Self {
        Self {
            n_pulses: 0,
            spacing: 10.0,
            theta: std::f64::consts::PI,
            probe_delay: 10.0,
            readout_grid: (0..=30).map(|i| f64::from(i) * 5.0).collect(),
            repetition_period: 2000.0,
            counts: vec![0, 1, 2, 5, 10, 20, 40],
            recovery_pulses: 20,
            probe_delays: vec![
                100.0, 150.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0, 1000.0, 1200.0, 1500.0,
                1800.0,
            ],
        }
    }
}

impl PulsesConfig {
    pub fn sequence(&self) -> PulseSequence {
        PulseSequence {
            n_pulses: self.n_pulses,
            spacing: self.spacing,
            theta: self.theta,
            probe_delay: self.probe_delay,
            readout_grid: self.readout_grid.clone(),
            repetition_period: self.repetition_period,
        }
    }

    fn validate(&self) -> Result<()> {
        self.sequence().validate("pulses")?;
        if self.counts.is_empty() {
            return Err(Error::invalid(
                "pulses.counts",
                "at least one pulse count is required",
            ));
        }
        let most = self
            .counts
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(self.recovery_pulses);
        PulseSequence {
            n_pulses: most,
            ..self.sequence()
        }
        .validate("pulses")?;
        if let Some(i) = self
            .probe_delays
            .iter()
            .position(|d| !(*d >= 0.0 && d.is_finite()))
        {
            return Err(Error::invalid(
                format!("pulses.probe_delays[{i}]"),
                "probe delays must be >= 0",
            ));
        }
        if let Some(i) = self.probe_delays.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                format!("pulses.probe_delays[{}]", i + 1),
                "probe delays must be strictly increasing",
            ));
        }
        Ok(())
    }
}

/// How `simulate-decay` produces its trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[default]
    MonteCarlo,
    /// Evaluate the decay law at `sim.decay` without sampling noise.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_trials: u64,
    pub seed: u64,
    pub mode: SimMode,
    /// `n_avg` is used by the analytic mode only; Monte Carlo draws the
    /// quasiparticle number from the bath.
    pub decay: DecayParams,
    pub qp_cap: usize,
    pub warmup: Option<f64>,
    pub repetitions: usize,
    /// Runs with a larger fraction of excluded trials exit with status 4.
    pub max_excluded_fraction: f64,
    /// Temperature grid for `sweep-temperature`, K.
    pub temperatures: Vec<f64>,
    /// Temperature-independent relaxation time, μs.
    pub t1ne: f64,
    /// Flux-bias grid for `sweep-flux`.
    pub flux_grid: Vec<f64>,
    /// `T̃1qp` at zero flux bias, μs.
    pub t1qp0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let engine = SimOptions::default();
        Self {
            n_trials: 100_000,
            seed: 0,
            mode: SimMode::MonteCarlo,
            decay: DecayParams::new(2.5, 23.0, 55.0),
            qp_cap: engine.qp_cap,
            warmup: engine.warmup,
            repetitions: engine.repetitions,
            max_excluded_fraction: 0.01,
            temperatures: (0..=33).map(|i| 0.02 + f64::from(i) * 0.01).collect(),
            t1ne: 55.0,
            flux_grid: (-20..=20).map(|i| f64::from(i) * 2e-4).collect(),
            t1qp0: 23.0,
        }
    }
}

impl SimConfig {
    pub fn engine(&self) -> SimOptions {
        SimOptions {
            qp_cap: self.qp_cap,
            warmup: self.warmup,
            threads: None,
            repetitions: self.repetitions,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("sim.n_trials", "n_trials must be >= 1"));
        }
        self.decay.validate("sim.decay")?;
        if self.qp_cap == 0 {
            return Err(Error::invalid("sim.qp_cap", "qp_cap must be >= 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid(
                "sim.repetitions",
                "repetitions must be >= 1",
            ));
        }
        if let Some(w) = self.warmup {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid("sim.warmup", "warmup must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.max_excluded_fraction) {
            return Err(Error::invalid(
                "sim.max_excluded_fraction",
                "must lie in [0, 1]",
            ));
        }
        if let Some(i) = self
            .temperatures
            .iter()
            .position(|t| !(*t > 0.0 && t.is_finite()))
        {
            return Err(Error::invalid(
                format!("sim.temperatures[{i}]"),
                "temperatures must be positive",
            ));
        }
        if !(self.t1ne > 0.0) {
            return Err(Error::invalid("sim.t1ne", "t1ne must be positive"));
        }
        if let Some(i) = self.flux_grid.iter().position(|f| !f.is_finite()) {
            return Err(Error::invalid(
                format!("sim.flux_grid[{i}]"),
                "flux bias must be finite",
            ));
        }
        if !(self.t1qp0 > 0.0) {
            return Err(Error::invalid("sim.t1qp0", "t1qp0 must be positive"));
        }
        Ok(())
    }
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub device: DeviceParams,
    pub bath: BathParams,
    pub pulses: PulsesConfig,
    pub sim: SimConfig,
    pub fit: FitOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            device: DeviceParams::device_a(),
            bath: BathParams::device_a(),
            pulses: PulsesConfig::default(),
            sim: SimConfig::default(),
            fit: FitOptions::default(),
        }
    }
}

impl Config {
    /// Reads and validates a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::ConfigNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(mut root) = value else {
            return Err(Error::invalid("", "configuration must be a JSON object"));
        };
        if let Some(key) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::invalid(key.clone(), "unknown top-level key"));
        }
        let mut section = |name: &str| -> Result<Map<String, Value>> {
            match root.remove(name) {
                None | Some(Value::Null) => Ok(Map::new()),
                Some(Value::Object(m)) => Ok(m),
                Some(_) => Err(Error::invalid(name, "section must be an object")),
            }
        };
        let mut device = section("device")?;
        let mut bath = section("bath")?;
        let pulses = section("pulses")?;
        let sim = section("sim")?;
        let fit = section("fit")?;

        let base_device = match device.remove("preset") {
            None => DeviceParams::device_a(),
            Some(Value::String(name)) => DeviceParams::preset(&name).ok_or_else(|| {
                Error::invalid("device.preset", format!("unknown preset {name:?}"))
            })?,
            Some(_) => return Err(Error::invalid("device.preset", "preset must be a string")),
        };
        convert_mev("device", &mut device, &DEVICE_ENERGIES)?;
        convert_mev("bath", &mut bath, &BATH_ENERGIES)?;

        let config = Config {
            device: overlay("device", &base_device, device)?,
            bath: overlay("bath", &BathParams::device_a(), bath)?,
            pulses: typed("pulses", pulses)?,
            sim: typed("sim", sim)?,
            fit: typed("fit", fit)?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks every invariant and reports the first violation with its field path.
    pub fn validate(&self) -> Result<()> {
        self.device.validate("device")?;
        self.bath.validate("bath")?;
        self.pulses.validate()?;
        self.sim.validate()?;
        self.fit.validate("fit")
    }

    /// Canonical JSON: sorted keys, shortest round-trip numbers.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    /// SHA-256 of [`Config::canonical_json`], hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Options for fits of pumped traces: `t1r` pinned to the configured
    /// residual time unless the `fit` section says otherwise.
    pub fn pump_fit_options(&self) -> FitOptions {
        FitOptions {
            fix_t1r: self.fit.fix_t1r.or(Some(self.sim.decay.t1r)),
            ..self.fit.clone()
        }
    }
}

fn convert_mev(section: &str, map: &mut Map<String, Value>, keys: &[&str]) -> Result<()> {
    for key in keys {
        let suffixed = format!("{key}_mev");
        if let Some(v) = map.remove(&suffixed) {
            if map.contains_key(*key) {
                return Err(Error::invalid(
                    format!("{section}.{suffixed}"),
                    format!("give either {key} or {suffixed}, not both"),
                ));
            }
            let mev = v.as_f64().ok_or_else(|| {
                Error::invalid(format!("{section}.{suffixed}"), "must be a number")
            })?;
            let ghz = Constants::CODATA.mev(mev);
            map.insert((*key).to_string(), Value::from(ghz));
        }
    }
    Ok(())
}

fn overlay<T: Serialize + serde::de::DeserializeOwned>(
    section: &str,
    base: &T,
    over: Map<String, Value>,
) -> Result<T> {
    let Value::Object(mut merged) = serde_json::to_value(base).expect("defaults serialize") else {
        unreachable!("sections serialize to objects")
    };
    for (k, v) in over {
        merged.insert(k, v);
    }
    typed(section, merged)
}

fn typed<T: serde::de::DeserializeOwned>(section: &str, map: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::invalid(section, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn gap_in_mev_is_converted() {
        let c = Config::from_json(r#"{"device": {"gap_mev": 0.233}}"#).unwrap();
        assert!((c.device.gap - 56.34).abs() < 5e-3, "{}", c.device.gap);
        let err = Config::from_json(r#"{"device": {"gap_mev": 0.233, "gap": 56.0}}"#).unwrap_err();
        assert!(err.to_string().contains("gap_mev"));
    }

    #[test]
    fn zero_t1qp_reports_path() {
        let err = Config::from_json(r#"{"sim": {"decay": {"n_avg": 2.5, "t1qp": 0, "t1r": 55}}}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("sim.decay.t1qp") && msg.contains("t1qp must be positive"),
            "{msg}"
        );
    }

    #[test]
    fn reference_parameters_accepted_unchanged() {
        let c = Config::from_json(r#"{"sim": {"decay": {"n_avg": 2.5, "t1qp": 23, "t1r": 55}}}"#)
            .unwrap();
        assert_eq!(c.sim.decay, DecayParams::new(2.5, 23.0, 55.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_json(r#"{"devices": {}}"#).is_err());
        assert!(Config::from_json(r#"{"bath": {"gamma_inn": 1.0}}"#).is_err());
        assert!(Config::from_json(r#"{"sim": {"trials": 10}}"#).is_err());
        assert!(Config::from_json(r#"{"device": {"preset": "deviceZ"}}"#).is_err());
    }

    #[test]
    fn preset_b_and_round_trip() {
        let c = Config::from_json(r#"{"device": {"preset": "deviceB"}, "fit": {"fix_t1r": 55}}"#)
            .unwrap();
        assert_eq!(c.device.omega0, 4.7);
        let again = Config::from_json(&c.to_json_pretty()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.digest(), c.digest());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = Config::from_json(
            r#"{"bath": {"gamma_in": 0.01, "gamma_out": 0.005}, "sim": {"seed": 3}}"#,
        )
        .unwrap();
        let b = Config::from_json(
            r#"{"sim": {"seed": 3}, "bath": {"gamma_out": 0.005, "gamma_in": 0.01}}"#,
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let c = Config::from_json(r#"{"sim": {"seed": 4}}"#).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
