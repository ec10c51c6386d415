//! Multi-run experiments built on [`run_protocol_with`]: pulse-count scans
//! and recovery after pumping.

use serde::{Deserialize, Serialize};

use super::protocol::{run_protocol_with, Estimate, ProtocolResult, SimOptions};
use crate::analytic::one_over_e_time;
use crate::error::{Error, Result};
use crate::fitting::{fit_decay, fit_recovery_weighted, FitOptions, FitResult, RecoveryFit};
use crate::params::{BathParams, DecayParams, DeviceParams, PulseSequence};
use crate::rng::derive_seed;

/// Everything shared by the runs of one experiment.
#[derive(Debug, Clone)]
pub struct Setup<'a> {
    pub bath: &'a BathParams,
    pub decay: &'a DecayParams,
    pub device: &'a DeviceParams,
    pub n_trials: u64,
    pub seed: u64,
    pub sim: &'a SimOptions,
    pub fit: &'a FitOptions,
}

impl Setup<'_> {
    fn run(&self, seq: &PulseSequence, index: u64) -> Result<ProtocolResult> {
        run_protocol_with(
            seq,
            self.bath,
            self.decay,
            self.device,
            self.n_trials,
            derive_seed(self.seed, index),
            self.sim,
        )
    }

    // Fits the trace normalized to its first point, as done for pumped traces.
    fn fit(&self, result: &ProtocolResult) -> Result<FitResult> {
        fit_decay(&result.trace.normalized(), self.fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpPoint {
    pub n_pulses: u32,
    pub result: ProtocolResult,
    pub fit: FitResult,
    /// `T1/e` of the fitted decay law, μs.
    pub t1e: f64,
}

/// Runs `base` once per pulse count in `counts`. Each run uses its own
/// derived seed.
pub fn pump_scan(base: &PulseSequence, counts: &[u32], setup: &Setup) -> Result<Vec<PumpPoint>> {
    if counts.is_empty() {
        return Err(Error::invalid(
            "pulses.counts",
            "at least one pulse count is required",
        ));
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let seq = PulseSequence {
                n_pulses: n,
                ..base.clone()
            };
            let result = setup.run(&seq, i as u64)?;
            let fit = setup.fit(&result)?;
            let t1e = one_over_e_time(&fit.params);
            Ok(PumpPoint {
                n_pulses: n,
                result,
                fit,
                t1e,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub probe_delay: f64,
    pub result: ProtocolResult,
    pub fit: FitResult,
    /// Sampled quasiparticle number at the probe.
    pub n_qp: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub points: Vec<RecoveryPoint>,
    /// Recovery law fitted to the decay-law `n_avg` series.
    pub fitted: RecoveryFit,
    /// Recovery law fitted to the sampled quasiparticle numbers.
    pub sampled: RecoveryFit,
}

impl RecoveryResult {
    pub fn fitted_series(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.probe_delay, p.fit.params.n_avg))
            .collect()
    }

    pub fn sampled_series(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.probe_delay, p.n_qp.mean))
            .collect()
    }
}

/// Pumps with `seq` and delays the probe by each entry of `probe_delays`.
pub fn recovery_experiment(
    seq: &PulseSequence,
    probe_delays: &[f64],
    setup: &Setup,
) -> Result<RecoveryResult> {
    if probe_delays.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: probe_delays.len(),
        });
    }
    if let Some(i) = probe_delays.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            format!("recovery.probe_delays[{}]", i + 1),
            "probe delays must be strictly increasing",
        ));
    }
    if !(probe_delays[0] >= 0.0) {
        return Err(Error::invalid(
            "recovery.probe_delays[0]",
            "probe delays must be >= 0",
        ));
    }
    let points = probe_delays
        .iter()
        .enumerate()
        .map(|(i, &delay)| {
            let s = PulseSequence {
                probe_delay: delay,
                ..seq.clone()
            };
            let result = setup.run(&s, i as u64)?;
            let fit = setup.fit(&result)?;
            let n_qp = result.probe.n_qp;
            Ok(RecoveryPoint {
                probe_delay: delay,
                result,
                fit,
                n_qp,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fitted_series: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.probe_delay, p.fit.params.n_avg))
        .collect();
    let fitted_se: Vec<f64> = points.iter().map(|p| p.fit.stderr.n_avg).collect();
    let sampled_series: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.probe_delay, p.n_qp.mean))
        .collect();
    let sampled_se: Vec<f64> = points.iter().map(|p| p.n_qp.se).collect();
    Ok(RecoveryResult {
        fitted: fit_recovery_weighted(&fitted_series, &positive_or_empty(&fitted_se))?,
        sampled: fit_recovery_weighted(&sampled_series, &positive_or_empty(&sampled_se))?,
        points,
    })
}

// Weights only when every point has a usable error bar.
fn positive_or_empty(se: &[f64]) -> Vec<f64> {
    if se.iter().all(|s| *s > 0.0 && s.is_finite()) {
        se.to_vec()
    } else {
        Vec::new()
    }
}
