//! Parameter uncertainties from the covariance matrix compared with a
//! residual bootstrap.
//!
//! cargo run --release --example bootstrap_errors

use qpump::fitting::{bootstrap, fit_decay, FitOptions};
use qpump::montecarlo::run_protocol;
use qpump::{BathParams, DecayParams, DeviceParams, PulseSequence};

fn main() -> qpump::Result<()> {
    let decay = DecayParams::new(2.5, 23.0, 55.0);
    let bath = BathParams {
        gamma_in: 2.5e-6,
        gamma_out: 1e-6,
        energy_resolved: false,
        ..BathParams::device_a()
    };
    let seq = PulseSequence {
        n_pulses: 0,
        spacing: 10.0,
        theta: std::f64::consts::PI,
        probe_delay: 0.0,
        readout_grid: (0..31).map(|i| 5.0 * f64::from(i)).collect(),
        repetition_period: 2000.0,
    };
    let run = run_protocol(&seq, &bath, &decay, &DeviceParams::device_a(), 5000, 1)?;
    let opts = FitOptions::default();
    let fit = fit_decay(&run.trace, &opts)?;
    let boot = bootstrap(&run.trace, &opts, 300, 2)?;

    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "param", "truth", "fit", "cov_se", "boot_sd"
    );
    let rows = [
        (
            "n_avg",
            decay.n_avg,
            fit.params.n_avg,
            fit.stderr.n_avg,
            boot.std.n_avg,
        ),
        (
            "t1qp",
            decay.t1qp,
            fit.params.t1qp,
            fit.stderr.t1qp,
            boot.std.t1qp,
        ),
        (
            "t1r",
            decay.t1r,
            fit.params.t1r,
            fit.stderr.t1r.unwrap_or(f64::NAN),
            boot.std.t1r.unwrap_or(f64::NAN),
        ),
    ];
    for (name, truth, value, se, sd) in rows {
        println!("{name:>8} {truth:>10.3} {value:>10.3} {se:>10.3} {sd:>10.3}");
    }
    println!("{} of {} resamples failed", boot.failed, boot.n_resamples);
    Ok(())
}
