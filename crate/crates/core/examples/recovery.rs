//! Refilling of the bath after a 20-pulse pump, fitted with the
//! exponential recovery law. Uses the bath where a quasiparticle that takes
//! the qubit energy leaves at once.
//!
//! cargo run --release --example recovery -- [trials]

use qpump::config::Config;
use qpump::montecarlo::{recovery_experiment, Setup};
use qpump::PulseSequence;

fn main() -> qpump::Result<()> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let mut config = Config::default();
    config.bath.energy_resolved = false;
    config.bath.exit_on_relax = true;
    let engine = config.sim.engine();
    let fit = config.pump_fit_options();
    let setup = Setup {
        bath: &config.bath,
        decay: &config.sim.decay,
        device: &config.device,
        n_trials: trials,
        seed: 11,
        sim: &engine,
        fit: &fit,
    };
    let seq = PulseSequence {
        n_pulses: 20,
        ..config.pulses.sequence()
    };
    let r = recovery_experiment(&seq, &config.pulses.probe_delays, &setup)?;
    println!("{:>8} {:>10} {:>10}", "delay", "n_sampled", "n_fitted");
    for p in &r.points {
        println!(
            "{:>8.0} {:>10.4} {:>10.4}",
            p.probe_delay, p.n_qp.mean, p.fit.params.n_avg
        );
    }
    let s = &r.sampled;
    println!(
        "sampled: tau = {:.1} us, steady n = {:.3} +/- {:.3}",
        s.time_constant(),
        s.n_steady,
        s.n_steady_se
    );
    println!(
        "decay-law fits: tau = {:.1} us, steady n = {:.3}",
        r.fitted.time_constant(),
        r.fitted.n_steady
    );
    Ok(())
}
