//! Fitting the decay law to a noisy synthetic trace, free and with the
//! residual relaxation time pinned.
//!
//! cargo run --release --example fit_trace

use rand::distr::Distribution;
use rand_distr::Binomial;

use qpump::analytic::decay_population;
use qpump::fitting::{fit_decay, FitOptions};
use qpump::rng::StreamId;
use qpump::{DecayParams, DecayTrace};

fn main() -> qpump::Result<()> {
    let truth = DecayParams::new(2.5, 23.0, 55.0);
    let shots = 2000u64;
    let mut rng = StreamId::new(3, 0, 0).rng();
    let delays: Vec<f64> = (0..31).map(|i| 5.0 * f64::from(i)).collect();
    let mut trace = DecayTrace::default();
    for &t in &delays {
        let p = decay_population(t, &truth)?;
        let k = Binomial::new(shots, p)
            .expect("p in [0,1]")
            .sample(&mut rng);
        let est = k as f64 / shots as f64;
        trace.delays.push(t);
        trace.populations.push(est);
        trace.stderr.push((est * (1.0 - est) / shots as f64).sqrt());
        trace.n_trials.push(shots);
    }

    let free = fit_decay(&trace, &FitOptions::default())?;
    let pinned = fit_decay(&trace, &FitOptions::pinned(55.0))?;
    println!("truth   {truth:?}");
    println!("free    {:?}", free.params);
    println!("        +/- {:?}", free.stderr);
    println!("pinned  {:?}", pinned.params);
    println!("        +/- {:?}", pinned.stderr);
    println!(
        "converged: {} after {} iterations",
        free.converged, free.n_iter
    );
    Ok(())
}
