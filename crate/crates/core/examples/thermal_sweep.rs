//! Relaxation time against bath temperature: flat while thermal
//! quasiparticles are frozen out, then a steep drop.
//!
//! cargo run --release --example thermal_sweep

use qpump::analytic::{thermal_rate, total_t1, ThermalModel};
use qpump::DeviceParams;

fn main() -> qpump::Result<()> {
    let model = ThermalModel {
        t1ne: 55.0,
        device: DeviceParams::device_a(),
    };
    let omega = model.device.omega0;
    println!("{:>6} {:>12} {:>10}", "T_mK", "rate_1/us", "T1_us");
    for i in 0..=33 {
        let temp = 0.02 + 0.01 * f64::from(i);
        let rate = thermal_rate(temp, &model.device, omega)?;
        println!(
            "{:>6.0} {:>12.4e} {:>10.3}",
            temp * 1e3,
            rate,
            total_t1(temp, &model, omega)?
        );
    }
    Ok(())
}
