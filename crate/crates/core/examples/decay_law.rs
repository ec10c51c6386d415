//! Closed-form decay of the excited state with a Poisson-distributed
//! quasiparticle number, and its single-exponential limits.
//!
//! cargo run --release --example decay_law

use qpump::analytic::{decay_population, one_over_e_time};
use qpump::DecayParams;

fn main() -> qpump::Result<()> {
    let cases = [
        ("no quasiparticles", DecayParams::new(0.0, 23.0, 55.0)),
        ("n = 2.5", DecayParams::new(2.5, 23.0, 55.0)),
        ("n = 0.5", DecayParams::new(0.5, 23.0, 55.0)),
    ];
    println!(
        "{:>8} {:>18} {:>12} {:>12}",
        "t_us", cases[0].0, cases[1].0, cases[2].0
    );
    for i in 0..=15 {
        let t = 10.0 * f64::from(i);
        let row: Vec<f64> = cases
            .iter()
            .map(|(_, p)| decay_population(t, p))
            .collect::<qpump::Result<_>>()?;
        println!(
            "{t:>8.0} {:>18.5} {:>12.5} {:>12.5}",
            row[0], row[1], row[2]
        );
    }
    for (name, p) in &cases {
        println!("T1/e for {name}: {:.2} us", one_over_e_time(p));
    }
    Ok(())
}
