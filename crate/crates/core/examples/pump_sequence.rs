//! Pumping quasiparticles out with repeated π-pulses. Prints the fitted
//! decay parameters and the sampled bath state at the probe for each
//! pulse count.
//!
//! cargo run --release --example pump_sequence -- [trials]

use qpump::config::Config;
use qpump::montecarlo::{pump_scan, Setup};

fn main() -> qpump::Result<()> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let config = Config::default();
    let engine = config.sim.engine();
    let fit = config.pump_fit_options();
    let setup = Setup {
        bath: &config.bath,
        decay: &config.sim.decay,
        device: &config.device,
        n_trials: trials,
        seed: 7,
        sim: &engine,
        fit: &fit,
    };
    let points = pump_scan(&config.pulses.sequence(), &config.pulses.counts, &setup)?;
    println!(
        "{:>4} {:>8} {:>8} {:>9} {:>8} {:>10}",
        "N", "n_fit", "t1qp", "T1/e", "n_probe", "E_qp GHz"
    );
    for p in &points {
        println!(
            "{:>4} {:>8.3} {:>8.2} {:>9.2} {:>8.3} {:>10.3}",
            p.n_pulses,
            p.fit.params.n_avg,
            p.fit.params.t1qp,
            p.t1e,
            p.result.probe.n_qp.mean,
            p.result.probe.qp_energy.mean
        );
    }
    Ok(())
}
