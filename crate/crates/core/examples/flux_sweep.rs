//! Qubit frequency and quasiparticle-limited relaxation time versus flux
//! bias away from the symmetry point.
//!
//! cargo run --release --example flux_sweep

use qpump::analytic::t1qp_flux;
use qpump::DeviceParams;

fn main() -> qpump::Result<()> {
    for device in [DeviceParams::device_a(), DeviceParams::device_b()] {
        println!("omega0 = {} GHz", device.omega0);
        println!(
            "{:>9} {:>10} {:>10} {:>8}",
            "f", "omega_GHz", "t1qp_us", "clamped"
        );
        for i in -8..=8 {
            let f = 5e-4 * f64::from(i);
            let p = t1qp_flux(f, 23.0, &device)?;
            println!(
                "{:>9.4} {:>10.4} {:>10.3} {:>8}",
                f, p.omega_f, p.t1qp_f, p.clamped
            );
        }
    }
    Ok(())
}
