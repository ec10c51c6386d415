//! Exact event-driven evolution of one qubit coupled to a small population
//! of quasiparticles.
//!
//! Competing exponential clocks:
//!
//! - arrival at `Γ_in`
//! - exit of quasiparticle `i` at `Γ_out` (scaled by `ν(Δ+δE)/ν(Δ+ε_i)` when
//!   energy resolved)
//! - residual relaxation at `1/T1R` while excited
//! - relaxation through quasiparticle `i` at `1/T̃1qp` while excited; the
//!   quasiparticle gains `ω0`, or leaves when `exit_on_relax` is set
//! - excitation by quasiparticle `i` with `ε_i ≥ ω0` at `η/T̃1qp` while in the
//!   ground state (energy resolved only); the quasiparticle loses `ω0`

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::params::{ArrivalEnergy, BathParams, DecayParams, DeviceParams};
use crate::rng::StreamId;
use crate::units::nu_excess;

/// Default bound on the number of quasiparticles tracked in one trial.
pub const DEFAULT_QP_CAP: usize = 64;

// Floor for excess energies so the density of states stays finite.
const MIN_EXCESS: f64 = 1e-12;

/// A quasiparticle in the qubit region, described by its excess energy
/// above the gap (GHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quasiparticle {
    pub energy: f64,
    exit_rate: f64,
}

impl Quasiparticle {
    pub fn exit_rate(&self) -> f64 {
        self.exit_rate
    }
}

/// State of one trial.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub excited: bool,
    pub qps: Vec<Quasiparticle>,
    /// μs; never decreases.
    pub clock: f64,
    pub stream: StreamId,
    /// Set once the quasiparticle cap was exceeded; the trial must be excluded.
    pub flagged: bool,
    rng: ChaCha8Rng,
}

impl TrialState {
    pub fn new(stream: StreamId) -> Self {
        Self {
            excited: false,
            qps: Vec::new(),
            clock: 0.0,
            stream,
            flagged: false,
            rng: stream.rng(),
        }
    }

    /// Copy of this state continuing on a fresh substream `fork`.
    pub fn fork(&self, fork: u32) -> Self {
        let stream = self.stream.with_fork(fork);
        Self {
            stream,
            rng: stream.rng(),
            ..self.clone()
        }
    }

    pub fn n_qp(&self) -> usize {
        self.qps.len()
    }

    pub fn total_energy(&self) -> f64 {
        self.qps.iter().map(|q| q.energy).sum()
    }

    /// Instantaneous pulse flipping the qubit with probability `p_flip`.
    /// Always consumes exactly one draw.
    pub fn pulse(&mut self, p_flip: f64) {
        let u: f64 = self.rng.random();
        if u < p_flip {
            self.excited = !self.excited;
        }
    }
}

/// Immutable rate tables shared by every trial of a run.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub bath: BathParams,
    pub decay: DecayParams,
    pub omega0: f64,
    pub gap: f64,
    pub qp_cap: usize,
    exit_anchor: f64,
    relax_qp: f64,
    relax_residual: f64,
    excite_qp: f64,
}

impl Kernel {
    pub fn new(
        bath: &BathParams,
        decay: &DecayParams,
        device: &DeviceParams,
        qp_cap: usize,
    ) -> Self {
        Self {
            bath: *bath,
            decay: *decay,
            omega0: device.omega0,
            gap: device.gap,
            qp_cap,
            exit_anchor: nu_excess(bath.delta_e, device.gap),
            relax_qp: 1.0 / decay.t1qp,
            relax_residual: 1.0 / decay.t1r,
            excite_qp: bath.excitation_ratio / decay.t1qp,
        }
    }

    /// Exit rate of a quasiparticle with excess energy `energy`.
    pub fn exit_rate(&self, energy: f64) -> f64 {
        if self.bath.energy_resolved {
            self.bath.gamma_out * self.exit_anchor / nu_excess(energy, self.gap)
        } else {
            self.bath.gamma_out
        }
    }

    pub fn quasiparticle(&self, energy: f64) -> Quasiparticle {
        let energy = energy.max(MIN_EXCESS);
        Quasiparticle {
            energy,
            exit_rate: self.exit_rate(energy),
        }
    }

    fn can_excite(&self, q: &Quasiparticle) -> bool {
        self.bath.energy_resolved && q.energy >= self.omega0
    }

    fn arrival_energy(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.bath.arrival {
            ArrivalEnergy::Fixed => self.bath.delta_e,
            ArrivalEnergy::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e * self.bath.delta_e
            }
        }
    }

    /// Advances `state` to `horizon` (μs). A flagged state is left untouched.
    pub fn step(&self, state: &mut TrialState, horizon: f64) {
        if state.flagged || horizon <= state.clock {
            return;
        }
        loop {
            let n = state.qps.len();
            let exit_total: f64 = state.qps.iter().map(|q| q.exit_rate).sum();
            let (qubit_total, hot) = if state.excited {
                (self.relax_residual + n as f64 * self.relax_qp, 0)
            } else if self.excite_qp > 0.0 {
                let hot = state.qps.iter().filter(|q| self.can_excite(q)).count();
                (hot as f64 * self.excite_qp, hot)
            } else {
                (0.0, 0)
            };
            let total = self.bath.gamma_in + exit_total + qubit_total;
            if total <= 0.0 {
                state.clock = horizon;
                return;
            }
            let wait: f64 = state.rng.sample::<f64, _>(Exp1) / total;
            if state.clock + wait >= horizon {
                state.clock = horizon;
                return;
            }
            state.clock += wait;

            let mut u = state.rng.random::<f64>() * total;
            if u < self.bath.gamma_in {
                let e = self.arrival_energy(&mut state.rng);
                state.qps.push(self.quasiparticle(e));
                if state.qps.len() > self.qp_cap {
                    state.flagged = true;
                    return;
                }
                continue;
            }
            u -= self.bath.gamma_in;
            if u < exit_total {
                let idx = pick_weighted(&state.qps, u);
                state.qps.swap_remove(idx);
                continue;
            }
            u -= exit_total;
            if state.excited {
                state.excited = false;
                if u >= self.relax_residual && n > 0 {
                    let idx = (((u - self.relax_residual) / self.relax_qp) as usize).min(n - 1);
                    if self.bath.exit_on_relax {
                        state.qps.swap_remove(idx);
                    } else {
                        let q = &mut state.qps[idx];
                        *q = self.quasiparticle(q.energy + self.omega0);
                    }
                }
            } else if hot > 0 {
                let k = ((u / self.excite_qp) as usize).min(hot - 1);
                let idx = state
                    .qps
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| self.can_excite(q))
                    .nth(k)
                    .map(|(i, _)| i)
                    .expect("hot quasiparticle index in range");
                state.excited = true;
                let q = &mut state.qps[idx];
                *q = self.quasiparticle(q.energy - self.omega0);
            }
        }
    }
}

fn pick_weighted(qps: &[Quasiparticle], mut u: f64) -> usize {
    for (i, q) in qps.iter().enumerate() {
        if u < q.exit_rate {
            return i;
        }
        u -= q.exit_rate;
    }
    qps.len() - 1
}

/// Advances a copy of `state` to `horizon` under the given parameters.
pub fn step(
    state: &TrialState,
    horizon: f64,
    bath: &BathParams,
    decay: &DecayParams,
    device: &DeviceParams,
) -> TrialState {
    let kernel = Kernel::new(bath, decay, device, DEFAULT_QP_CAP);
    let mut next = state.clone();
    kernel.step(&mut next, horizon);
    next
}
