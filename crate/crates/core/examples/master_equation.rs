//! Relaxation of the quasiparticle-number distribution toward its Poisson
//! steady state, starting from an empty bath.
//!
//! cargo run --release --example master_equation

use qpump::analytic::{mean_nqp, poisson_steady};
use qpump::master_eq::{evolve, NumberDistribution};

fn main() -> qpump::Result<()> {
    let (gamma_in, gamma_out) = (1.0 / 150.0, 1.0 / 300.0);
    let n_max = 40;
    let empty = NumberDistribution::delta(0, n_max);
    let steady = poisson_steady(gamma_in, gamma_out, n_max)?;

    println!(
        "{:>8} {:>10} {:>10} {:>12}",
        "t_us", "mean", "expected", "TV to steady"
    );
    for t in [0.0, 100.0, 300.0, 600.0, 1200.0, 3000.0, 6000.0] {
        let p = evolve(&empty, gamma_in, gamma_out, t, 1.0)?;
        let want = mean_nqp(t, 0.0, gamma_in, gamma_out)?;
        println!(
            "{t:>8.0} {:>10.6} {:>10.6} {:>12.3e}",
            p.mean(),
            want,
            p.total_variation(&steady.probs)
        );
    }
    Ok(())
}
