//! Cross-module oracle suite behind `qpump validate`.

use rand::Rng;
use serde::Serialize;

use crate::analytic::{
    self, decay_population, mean_nqp, poisson_pmf, poisson_steady, t1qp_flux, ThermalModel,
};
use crate::error::Result;
use crate::master_eq::{decay_oracle, evolve, NumberDistribution};
use crate::montecarlo::run_protocol;
use crate::params::{ArrivalEnergy, BathParams, DecayParams, DeviceParams, PulseSequence};
use crate::rng::StreamId;

pub struct ValidateOptions {
    /// Ten times fewer trials and 5 SE instead of 3 SE tolerances.
    pub quick: bool,
    pub seed: u64,
    /// K0 implementation under test; replaceable for mutation checks.
    pub k0: fn(f64) -> Result<f64>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 20_240_501,
            k0: analytic::bessel_k0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed deviation, in the units of `tolerance`.
    pub metric: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, metric: f64, tolerance: f64) -> Self {
        Self {
            name,
            metric,
            tolerance,
            passed: metric <= tolerance,
        }
    }
}

/// `K0(x) = ∫₀^∞ e^{−x cosh t} dt` by the trapezoid rule, which converges
/// geometrically for this integrand.
pub fn k0_quadrature(x: f64) -> f64 {
    let h = 1.0 / 128.0;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1u32;
    loop {
        let term = (-x * (f64::from(k) * h).cosh()).exp();
        sum += term;
        if term < 1e-300 || term < sum * 1e-18 {
            break;
        }
        k += 1;
    }
    sum * h
}

pub fn run_validation(opts: &ValidateOptions) -> Vec<Check> {
    vec![
        mixture_identity(opts),
        master_equation(opts),
        monte_carlo_vs_analytic(opts),
        k0_accuracy(opts),
        thermal_plateau(),
        flux_identity(),
    ]
}

fn mixture_identity(opts: &ValidateOptions) -> Check {
    let mut rng = StreamId::new(opts.seed, 0, 0).rng();
    let mut sets = vec![DecayParams::new(2.5, 23.0, 55.0)];
    for _ in 0..20 {
        sets.push(DecayParams::new(
            rng.random_range(0.0..10.0),
            rng.random_range(1.0..100.0),
            rng.random_range(10.0..200.0),
        ));
    }
    let mut worst: f64 = 0.0;
    for p in &sets {
        let dist = NumberDistribution {
            probs: poisson_pmf(p.n_avg, 200),
            time: 0.0,
        };
        for i in 0..1000 {
            let t = 10.0 * p.t1r * f64::from(i) / 999.0;
            let mix = decay_oracle(&dist, p, t).unwrap_or(f64::NAN);
            let closed = decay_population(t, p).unwrap_or(f64::NAN);
            worst = worst.max((mix - closed).abs());
        }
    }
    Check::new("mixture identity (abs)", worst, 1e-12)
}

fn master_equation(opts: &ValidateOptions) -> Check {
    let mut rng = StreamId::new(opts.seed, 1, 0).rng();
    let pairs = if opts.quick { 3 } else { 10 };
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let gout = rng.random_range(1.0 / 1000.0..1.0 / 50.0);
        let gin = gout * rng.random_range(0.5..5.0);
        let n_max = 60;
        let p0 = NumberDistribution::delta(0, n_max);
        let t = 20.0 / gout;
        let tv = evolve(&p0, gin, gout, t, 1.0)
            .and_then(|p| poisson_steady(gin, gout, n_max).map(|s| p.total_variation(&s.probs)))
            .unwrap_or(f64::INFINITY);
        // mean trajectory, scaled so both sub-checks share the 1e-6 budget
        let mut mean_err: f64 = 0.0;
        for k in 1..=5 {
            let tk = f64::from(k) / gout;
            let m = evolve(&p0, gin, gout, tk, 1.0)
                .map(|p| p.mean())
                .unwrap_or(f64::NAN);
            let want = mean_nqp(tk, 0.0, gin, gout).unwrap_or(f64::NAN);
            mean_err = mean_err.max((m - want).abs());
        }
        worst = worst.max(tv).max(mean_err * 10.0);
    }
    Check::new("master-eq steady state (TV)", worst, 1e-6)
}

fn monte_carlo_vs_analytic(opts: &ValidateOptions) -> Check {
    let (trials, tol) = if opts.quick {
        (10_000, 5.0)
    } else {
        (100_000, 3.0)
    };
    // a slow bath keeps the quasiparticle number fixed over each readout window
    let bath = BathParams {
        gamma_in: 2.5e-6,
        gamma_out: 1e-6,
        delta_e: 1.46,
        energy_resolved: false,
        excitation_ratio: 1.0,
        arrival: ArrivalEnergy::Fixed,
        exit_on_relax: false,
    };
    let decay = DecayParams::new(2.5, 23.0, 55.0);
    let seq = PulseSequence {
        n_pulses: 0,
        spacing: 10.0,
        theta: std::f64::consts::PI,
        probe_delay: 0.0,
        readout_grid: (0..30).map(|i| f64::from(i) * 5.0).collect(),
        repetition_period: 2000.0,
    };
    let device = DeviceParams::device_a();
    let Ok(result) = run_protocol(&seq, &bath, &decay, &device, trials, opts.seed) else {
        return Check::new("Monte Carlo vs decay law (SE)", f64::INFINITY, tol);
    };
    let n = result.stats.included as f64;
    let worst = seq
        .readout_grid
        .iter()
        .zip(&result.trace.populations)
        .map(|(&t, &p)| {
            let want = decay_population(t, &decay).unwrap_or(f64::NAN);
            let se = (want * (1.0 - want) / n).sqrt();
            if se > 0.0 {
                (p - want).abs() / se
            } else {
                (p - want).abs() * 1e12
            }
        })
        .fold(0.0, f64::max);
    Check::new("Monte Carlo vs decay law (SE)", worst, tol)
}

fn k0_accuracy(opts: &ValidateOptions) -> Check {
    let mut rng = StreamId::new(opts.seed, 2, 0).rng();
    let mut xs: Vec<f64> = (0..100).map(|_| rng.random_range(0.05..30.0)).collect();
    xs.extend([0.05, 1.0, 2.0, 10.0, 30.0]);
    let worst = xs
        .iter()
        .map(|&x| {
            let want = k0_quadrature(x);
            match (opts.k0)(x) {
                Ok(got) => ((got - want) / want).abs(),
                Err(_) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max);
    Check::new("K0 vs quadrature (rel)", worst, 1e-10)
}

fn thermal_plateau() -> Check {
    let model = ThermalModel {
        t1ne: 55.0,
        device: DeviceParams::device_a(),
    };
    let omega = model.device.omega0;
    let mut worst: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for i in 0..=330 {
        let t = 0.02 + f64::from(i) * 1e-3;
        let t1 = analytic::total_t1(t, &model, omega).unwrap_or(f64::NAN);
        if t1 > prev || t1.is_nan() {
            worst = f64::INFINITY;
        }
        prev = t1;
        if t <= 0.1 + 1e-12 {
            worst = worst.max((t1 / model.t1ne - 1.0).abs());
        }
    }
    Check::new("thermal plateau (rel)", worst, 1e-2)
}

fn flux_identity() -> Check {
    let device = DeviceParams::device_a();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let f = -0.004 + 0.008 * f64::from(i) / 49.0;
        let Ok(p) = t1qp_flux(f, 23.0, &device) else {
            return Check::new("flux relation (rel)", f64::INFINITY, 1e-12);
        };
        let (me_s, _) = device.me_small_table.lookup(f);
        let want = (device.omega0 / p.omega_f).sqrt()
            * (1.0 + device.alpha * me_s * me_s / (device.me_large * device.me_large));
        worst = worst.max((23.0 / p.t1qp_f / want - 1.0).abs());
    }
    let at_zero = t1qp_flux(0.0, 23.0, &device).map_or(f64::INFINITY, |p| (p.t1qp_f - 23.0).abs());
    Check::new("flux relation (rel)", worst.max(at_zero), 1e-12)
}

/// Fixed-width pass/fail table.
pub fn report_table(checks: &[Check]) -> String {
    let mut out = format!(
        "{:<32} {:>12} {:>10}  result\n",
        "check", "metric", "tolerance"
    );
    for c in checks {
        out.push_str(&format!(
            "{:<32} {:>12.3e} {:>10.1e}  {}\n",
            c.name,
            c.metric,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
