//! Pump-and-probe protocol over many independent trials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, TrialState, DEFAULT_QP_CAP};
use crate::error::{Error, Result};
use crate::params::{BathParams, DecayParams, DecayTrace, DeviceParams, PulseSequence};
use crate::rng::StreamId;

/// Engine settings that do not change the physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub qp_cap: usize,
    /// Warmup before the first pulse, μs. Raised to at least `10/Γ_out`.
    pub warmup: Option<f64>,
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub threads: Option<usize>,
    /// Number of blocks the trials are split into for per-repetition traces.
    pub repetitions: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            qp_cap: DEFAULT_QP_CAP,
            warmup: None,
            threads: None,
            repetitions: 10,
        }
    }
}

impl SimOptions {
    pub fn warmup_for(&self, bath: &BathParams) -> f64 {
        let floor = 10.0 / bath.gamma_out;
        self.warmup.map_or(floor, |w| w.max(floor))
    }
}

/// Mean and standard error of a sampled quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, count: f64) -> Self {
        if count <= 0.0 {
            return Self::default();
        }
        let mean = sum / count;
        let var = if count > 1.0 {
            ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / count).sqrt(),
        }
    }

    fn binomial(successes: u64, count: u64) -> Self {
        if count == 0 {
            return Self::default();
        }
        let p = successes as f64 / count as f64;
        Self {
            mean: p,
            se: (p * (1.0 - p) / count as f64).sqrt(),
        }
    }
}

/// Mean quasiparticle number at a time measured from the first pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NqpSample {
    pub time: f64,
    pub n_qp: Estimate,
}

/// Bath and qubit statistics just before the probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeStats {
    pub n_qp: Estimate,
    /// Mean excess energy per quasiparticle present at the probe (GHz).
    pub qp_energy: Estimate,
    /// Excited population immediately before the probe.
    pub excited: Estimate,
}

/// Run bookkeeping written to the metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_trials: u64,
    pub included: u64,
    pub excluded: u64,
    pub warmup_us: f64,
    pub seed: u64,
}

impl RunStats {
    pub fn excluded_fraction(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.excluded as f64 / self.n_trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Excited population after the probe versus readout delay.
    pub trace: DecayTrace,
    /// Mean quasiparticle number before each pump pulse and at the probe.
    pub nqp_vs_time: Vec<NqpSample>,
    /// Excited population at the end of each pump interval, i.e. just before
    /// pulse `j ≥ 1` and before the probe.
    pub interval_populations: Vec<Estimate>,
    pub probe: ProbeStats,
    /// Per-block traces over the readout grid, one row per repetition block.
    pub per_trace_population: Vec<Vec<f64>>,
    /// Histogram of the quasiparticle number at the end of warmup.
    pub warmup_counts: Vec<u64>,
    pub stats: RunStats,
}

struct TrialOutcome {
    excluded: bool,
    warmup_n: u32,
    n_before_pulse: Vec<u32>,
    excited_before_pulse: Vec<bool>,
    n_probe: u32,
    energy_probe: f64,
    excited_probe: bool,
    readout: Vec<bool>,
}

/// Runs `n_trials` independent trials of `seq` with default engine options.
pub fn run_protocol(
    seq: &PulseSequence,
    bath: &BathParams,
    decay: &DecayParams,
    device: &DeviceParams,
    n_trials: u64,
    seed: u64,
) -> Result<ProtocolResult> {
    run_protocol_with(
        seq,
        bath,
        decay,
        device,
        n_trials,
        seed,
        &SimOptions::default(),
    )
}

/// Probe pulses are always π rotations; `seq.theta` applies to the pump pulses.
pub fn run_protocol_with(
    seq: &PulseSequence,
    bath: &BathParams,
    decay: &DecayParams,
    device: &DeviceParams,
    n_trials: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<ProtocolResult> {
    if n_trials == 0 {
        return Err(Error::invalid("sim.n_trials", "n_trials must be >= 1"));
    }
    seq.validate("pulses")?;
    bath.validate("bath")?;
    decay.validate("sim.decay")?;
    device.validate("device")?;
    if opts.repetitions == 0 {
        return Err(Error::invalid(
            "sim.repetitions",
            "repetitions must be >= 1",
        ));
    }

    let kernel = Kernel::new(bath, decay, device, opts.qp_cap);
    let warmup = opts.warmup_for(bath);
    let (pumps, probe) = seq.pulse_times();
    let p_flip = seq.flip_probability();

    let run_one = |trial: u64| -> TrialOutcome {
        let mut state = TrialState::new(StreamId::new(seed, trial, 0));
        kernel.step(&mut state, warmup);
        let warmup_n = state.n_qp() as u32;
        let mut n_before_pulse = Vec::with_capacity(pumps.len());
        let mut excited_before_pulse = Vec::with_capacity(pumps.len());
        for &t in &pumps {
            kernel.step(&mut state, warmup + t);
            n_before_pulse.push(state.n_qp() as u32);
            excited_before_pulse.push(state.excited);
            state.pulse(p_flip);
        }
        kernel.step(&mut state, warmup + probe);
        let n_probe = state.n_qp() as u32;
        let energy_probe = state.total_energy();
        let excited_probe = state.excited;
        state.pulse(1.0);
        let t0 = state.clock;
        let mut excluded = state.flagged;
        let readout = seq
            .readout_grid
            .iter()
            .enumerate()
            .map(|(k, &tau)| {
                let mut branch = state.fork(k as u32 + 1);
                kernel.step(&mut branch, t0 + tau);
                excluded |= branch.flagged;
                branch.excited
            })
            .collect();
        TrialOutcome {
            excluded,
            warmup_n,
            n_before_pulse,
            excited_before_pulse,
            n_probe,
            energy_probe,
            excited_probe,
            readout,
        }
    };

    let outcomes: Vec<TrialOutcome> = match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
            pool.install(|| (0..n_trials).into_par_iter().map(run_one).collect())
        }
        None => (0..n_trials).into_par_iter().map(run_one).collect(),
    };

    Ok(reduce(
        seq,
        &pumps,
        probe,
        outcomes,
        opts.repetitions,
        RunStats {
            n_trials,
            included: 0,
            excluded: 0,
            warmup_us: warmup,
            seed,
        },
    ))
}

// Sequential, index-ordered reduction: the result is independent of how
// trials were scheduled.
fn reduce(
    seq: &PulseSequence,
    pumps: &[f64],
    probe: f64,
    outcomes: Vec<TrialOutcome>,
    repetitions: usize,
    mut stats: RunStats,
) -> ProtocolResult {
    let n_grid = seq.readout_grid.len();
    let n_pumps = pumps.len();
    let n_total = outcomes.len();
    let blocks = repetitions.min(n_total).max(1);

    let mut readout_hits = vec![0u64; n_grid];
    let mut block_hits = vec![vec![0u64; n_grid]; blocks];
    let mut block_count = vec![0u64; blocks];
    let mut n_sum = vec![0.0; n_pumps + 1];
    let mut n_sq = vec![0.0; n_pumps + 1];
    let mut excited_hits = vec![0u64; n_pumps];
    let mut energy_sum = 0.0;
    let mut energy_sq = 0.0;
    let mut energy_count = 0.0;
    let mut warmup_counts: Vec<u64> = Vec::new();
    let mut included = 0u64;

    for (i, o) in outcomes.iter().enumerate() {
        if o.excluded {
            continue;
        }
        included += 1;
        let w = o.warmup_n as usize;
        if warmup_counts.len() <= w {
            warmup_counts.resize(w + 1, 0);
        }
        warmup_counts[w] += 1;
        let block = i * blocks / n_total;
        block_count[block] += 1;
        for (k, &hit) in o.readout.iter().enumerate() {
            if hit {
                readout_hits[k] += 1;
                block_hits[block][k] += 1;
            }
        }
        for (j, &n) in o
            .n_before_pulse
            .iter()
            .chain(std::iter::once(&o.n_probe))
            .enumerate()
        {
            let n = f64::from(n);
            n_sum[j] += n;
            n_sq[j] += n * n;
        }
        // end-of-interval populations: before pulses 1.. and before the probe
        for (j, &e) in o
            .excited_before_pulse
            .iter()
            .skip(1)
            .chain(std::iter::once(&o.excited_probe))
            .enumerate()
        {
            if j < n_pumps && e {
                excited_hits[j] += 1;
            }
        }
        if o.n_probe > 0 {
            // each quasiparticle contributes one sample at the trial's mean energy
            let n = f64::from(o.n_probe);
            let mean_e = o.energy_probe / n;
            energy_sum += o.energy_probe;
            energy_sq += n * mean_e * mean_e;
            energy_count += n;
        }
    }
    stats.included = included;
    stats.excluded = n_total as u64 - included;
    let cnt = included as f64;

    let mut populations = Vec::with_capacity(n_grid);
    let mut stderr = Vec::with_capacity(n_grid);
    for &h in &readout_hits {
        let e = Estimate::binomial(h, included);
        populations.push(e.mean);
        stderr.push(e.se);
    }
    let trace = DecayTrace {
        delays: seq.readout_grid.clone(),
        populations,
        stderr,
        n_trials: vec![included; n_grid],
    };

    let times: Vec<f64> = pumps
        .iter()
        .copied()
        .chain(std::iter::once(probe))
        .collect();
    let nqp_vs_time = times
        .iter()
        .enumerate()
        .map(|(j, &time)| NqpSample {
            time,
            n_qp: Estimate::from_sums(n_sum[j], n_sq[j], cnt),
        })
        .collect();
    let interval_populations = excited_hits
        .iter()
        .map(|&h| Estimate::binomial(h, included))
        .collect();

    let excited_probe = outcomes
        .iter()
        .filter(|o| !o.excluded && o.excited_probe)
        .count() as u64;
    let probe_stats = ProbeStats {
        n_qp: Estimate::from_sums(n_sum[n_pumps], n_sq[n_pumps], cnt),
        qp_energy: Estimate::from_sums(energy_sum, energy_sq, energy_count),
        excited: Estimate::binomial(excited_probe, included),
    };

    let per_trace_population = block_hits
        .iter()
        .zip(&block_count)
        .map(|(hits, &c)| {
            hits.iter()
                .map(|&h| if c > 0 { h as f64 / c as f64 } else { 0.0 })
                .collect()
        })
        .collect();

    ProtocolResult {
        trace,
        nqp_vs_time,
        interval_populations,
        probe: probe_stats,
        per_trace_population,
        warmup_counts,
        stats,
    }
}
