//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! cargo test --release --test acceptance

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;

use qpump::analytic::{
    decay_population, mean_nqp, poisson_steady, t1qp_flux, total_t1, ThermalModel,
};
use qpump::config::Config;
use qpump::fitting::{fit_decay, FitOptions};
use qpump::io::commands::{simulate_decay, simulate_pump, RunContext};
use qpump::io::validate::k0_quadrature;
use qpump::master_eq::{evolve, NumberDistribution};
use qpump::montecarlo::{
    pump_scan, recovery_experiment, run_protocol, run_protocol_with, Setup, SimOptions,
};
use qpump::rng::StreamId;
use qpump::{analytic, BathParams, DecayParams, DecayTrace, DeviceParams, PulseSequence};

struct Outcome {
    passed: bool,
    detail: String,
    /// Extra line printed after the verdict, not part of it.
    info: Option<String>,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
        info: None,
    }
}

fn grid30() -> Vec<f64> {
    (0..30).map(|i| 5.0 * f64::from(i)).collect()
}

fn probe_only(readout_grid: Vec<f64>) -> PulseSequence {
    PulseSequence {
        n_pulses: 0,
        spacing: 10.0,
        theta: PI,
        probe_delay: 0.0,
        readout_grid,
        repetition_period: 2000.0,
    }
}

// Poisson-weighted mixture summed directly from the recursion P(n) = P(n-1)·m/n.
fn mixture(t: f64, p: &DecayParams, n_max: u32) -> f64 {
    let x = (-t / p.t1qp).exp();
    let mut weight = (-p.n_avg).exp();
    let mut acc = weight;
    for n in 1..=n_max {
        weight *= p.n_avg * x / f64::from(n);
        acc += weight;
    }
    acc * (-t / p.t1r).exp()
}

fn c1_mixture_identity() -> Outcome {
    let mut rng = StreamId::new(101, 0, 0).rng();
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
        for i in 0..1000 {
            let t = 5.0 * p.t1r * f64::from(i) / 999.0;
            let closed = decay_population(t, p).unwrap();
            worst = worst.max((mixture(t, p, 200) - closed).abs());
        }
    }
    outcome(
        worst < 1e-12,
        format!("21 sets x 1000 times, max |diff| = {worst:.2e} (tol 1e-12)"),
    )
}

fn c2_master_equation() -> Outcome {
    let mut rng = StreamId::new(102, 0, 0).rng();
    let (mut tv_worst, mut mean_worst) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let gout = rng.random_range(1.0 / 1000.0..1.0 / 50.0);
        let gin = gout * rng.random_range(0.2..5.0);
        let n_max = 80;
        let empty = NumberDistribution::delta(0, n_max);
        let end = evolve(&empty, gin, gout, 20.0 / gout, 1.0).unwrap();
        let steady = poisson_steady(gin, gout, n_max).unwrap();
        tv_worst = tv_worst.max(end.total_variation(&steady.probs));
        for k in 1..=10 {
            let t = 0.5 * f64::from(k) / gout;
            let m = evolve(&empty, gin, gout, t, 1.0).unwrap().mean();
            mean_worst = mean_worst.max((m - mean_nqp(t, 0.0, gin, gout).unwrap()).abs());
        }
    }
    outcome(
        tv_worst < 1e-6 && mean_worst < 1e-7,
        format!("10 rate pairs, TV = {tv_worst:.2e} (tol 1e-6), mean error = {mean_worst:.2e} (tol 1e-7)"),
    )
}

fn quasi_static_bath() -> BathParams {
    BathParams {
        gamma_in: 2.5e-6,
        gamma_out: 1e-6,
        delta_e: 1.46,
        energy_resolved: false,
        excitation_ratio: 1.0,
        arrival: qpump::ArrivalEnergy::Fixed,
        exit_on_relax: false,
    }
}

fn c3_monte_carlo() -> Outcome {
    // The bath is slow against the readout window so the number is frozen per trial.
    let decay = DecayParams::new(2.5, 23.0, 55.0);
    let seq = probe_only(grid30());
    let r = run_protocol(
        &seq,
        &quasi_static_bath(),
        &decay,
        &DeviceParams::device_a(),
        100_000,
        103,
    )
    .unwrap();
    let n = r.stats.included as f64;
    let mut worst: f64 = 0.0;
    for (&t, &p) in seq.readout_grid.iter().zip(&r.trace.populations) {
        let want = decay_population(t, &decay).unwrap();
        let se = (want * (1.0 - want) / n).sqrt();
        let z = if se > 0.0 {
            (p - want).abs() / se
        } else if p == want {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    outcome(
        worst <= 3.0,
        format!("1e5 trials, 30 delays, worst |z| = {worst:.2} (tol 3 SE)"),
    )
}

fn c4_fit_round_trip() -> Outcome {
    let delays: Vec<f64> = (0..=30).map(|i| 5.0 * f64::from(i)).collect();
    let mut worst: f64 = 0.0;
    for &n in &[0.5, 1.0, 2.5, 4.0] {
        for &q in &[7.0, 20.0, 30.0] {
            for &r in &[40.0, 55.0, 80.0] {
                let truth = DecayParams::new(n, q, r);
                let pops = delays
                    .iter()
                    .map(|&t| decay_population(t, &truth).unwrap())
                    .collect();
                let fit = fit_decay(
                    &DecayTrace::from_samples(delays.clone(), pops),
                    &FitOptions::default(),
                )
                .unwrap();
                for (got, want) in [
                    (fit.params.n_avg, n),
                    (fit.params.t1qp, q),
                    (fit.params.t1r, r),
                ] {
                    worst = worst.max((got / want - 1.0).abs());
                }
            }
        }
    }

    let truth = DecayParams::new(2.2, 20.0, 55.0);
    let shots = 2000u64;
    let opts = FitOptions::pinned(55.0);
    let mut good = 0;
    for seed in 0..200u64 {
        let mut rng = StreamId::new(104, seed, 0).rng();
        let mut trace = DecayTrace::default();
        for &t in &delays {
            let p = decay_population(t, &truth).unwrap();
            let est = Binomial::new(shots, p).unwrap().sample(&mut rng) as f64 / shots as f64;
            trace.delays.push(t);
            trace.populations.push(est);
            trace.stderr.push((est * (1.0 - est) / shots as f64).sqrt());
            trace.n_trials.push(shots);
        }
        if let Ok(fit) = fit_decay(&trace, &opts) {
            if (fit.params.n_avg / 2.2 - 1.0).abs() < 0.1
                && (fit.params.t1qp / 20.0 - 1.0).abs() < 0.1
            {
                good += 1;
            }
        }
    }
    outcome(
        worst < 0.01 && good >= 190,
        format!("noiseless grid worst rel error {worst:.2e} (tol 1e-2); noisy: {good}/200 within 10% (need 190)"),
    )
}

fn pump_config() -> (Config, SimOptions, FitOptions) {
    let config = Config::default();
    let engine = config.sim.engine();
    let fit = config.pump_fit_options();
    (config, engine, fit)
}

fn c5_pumping() -> Outcome {
    let (config, engine, fit) = pump_config();
    let setup = Setup {
        bath: &config.bath,
        decay: &config.sim.decay,
        device: &config.device,
        n_trials: 100_000,
        seed: 105,
        sim: &engine,
        fit: &fit,
    };
    let pts = pump_scan(&config.pulses.sequence(), &config.pulses.counts, &setup).unwrap();
    let n: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| (p.fit.params.n_avg, p.fit.stderr.n_avg))
        .collect();
    let e: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| (p.result.probe.qp_energy.mean, p.result.probe.qp_energy.se))
        .collect();
    let t1e: Vec<f64> = pts.iter().map(|p| p.t1e).collect();
    let slack = |w: &[(f64, f64)]| 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
    let a = n.windows(2).all(|w| w[1].0 <= w[0].0 + slack(w));
    let b = n[n.len() - 1].0 <= 0.5 * n[0].0;
    let c = t1e[t1e.len() - 1] >= 2.0 * t1e[0];
    let d = e.windows(2).all(|w| w[1].0 + slack(w) >= w[0].0);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        a && b && c && d,
        format!(
            "N = {:?}: n_avg [{}] (a {} b {}), T1/e [{}] (c {}), energy [{}] (d {})",
            config.pulses.counts,
            fmt(&n.iter().map(|x| x.0).collect::<Vec<_>>()),
            a,
            b,
            fmt(&t1e),
            c,
            fmt(&e.iter().map(|x| x.0).collect::<Vec<_>>()),
            d,
        ),
    )
}

fn c6_two_pi_control() -> Outcome {
    let (config, engine, _) = pump_config();
    let base = config.pulses.sequence();
    let run = |seq: &PulseSequence, seed| {
        run_protocol_with(
            seq,
            &config.bath,
            &config.sim.decay,
            &config.device,
            100_000,
            seed,
            &engine,
        )
        .unwrap()
    };
    let reference = run(
        &PulseSequence {
            n_pulses: 0,
            ..base.clone()
        },
        1061,
    );
    let two_pi = run(
        &PulseSequence {
            n_pulses: 40,
            theta: 2.0 * PI,
            ..base.clone()
        },
        1062,
    );
    let (a, b) = (&reference.trace, &two_pi.trace);
    let mut worst_z: f64 = 0.0;
    for i in 0..a.len() {
        let se = (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
        let diff = (a.populations[i] - b.populations[i]).abs();
        worst_z = worst_z.max(if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    // Two-sample KS on the relaxation-time distributions sampled at the readout grid.
    let cdf = |t: &DecayTrace, i: usize| 1.0 - t.populations[i] / t.populations[0];
    let d = (0..a.len())
        .map(|i| (cdf(a, i) - cdf(b, i)).abs())
        .fold(0.0, f64::max);
    let (n, m) = (
        reference.stats.included as f64,
        two_pi.stats.included as f64,
    );
    let critical = 1.9495 * ((n + m) / (n * m)).sqrt();
    outcome(
        worst_z <= 3.0 && d < critical,
        format!(
            "40 x 2pi vs N = 0: worst |z| = {worst_z:.2} (tol 3), KS D = {d:.2e} < {critical:.2e}"
        ),
    )
}

fn recovery_config() -> Config {
    let mut config = Config::default();
    config.bath.energy_resolved = false;
    config.bath.exit_on_relax = true;
    config
}

fn c7_recovery() -> Outcome {
    let config = recovery_config();
    let engine = config.sim.engine();
    let fit = config.pump_fit_options();
    let setup = Setup {
        bath: &config.bath,
        decay: &config.sim.decay,
        device: &config.device,
        n_trials: 100_000,
        seed: 107,
        sim: &engine,
        fit: &fit,
    };
    let seq = PulseSequence {
        n_pulses: 20,
        spacing: 10.0,
        ..config.pulses.sequence()
    };
    let r = recovery_experiment(&seq, &config.pulses.probe_delays, &setup).unwrap();
    let target = config.bath.mean_steady();
    let tau = r.sampled.time_constant();
    let last = r.points.last().unwrap().n_qp;
    let tau_ok = (tau / 300.0 - 1.0).abs() < 0.1;
    let steady_ok = (r.sampled.n_steady - target).abs() <= 3.0 * r.sampled.n_steady_se;
    let last_ok = (last.mean - target).abs() <= 3.0 * last.se;
    let info = format!(
        "decay-law n_avg series: tau = {:.1} us, asymptote = {:.3} +/- {:.3}",
        r.fitted.time_constant(),
        r.fitted.n_steady,
        r.fitted.n_steady_se
    );
    Outcome {
        info: Some(info),
        ..outcome(
            tau_ok && steady_ok && last_ok,
            format!(
                "N = 20, dT = 10 us: tau = {tau:.1} us (300 +/- 10%), steady n = {:.3} +/- {:.3}, n at {} us = {:.3} +/- {:.3}",
                r.sampled.n_steady,
                r.sampled.n_steady_se,
                r.points.last().unwrap().probe_delay,
                last.mean,
                last.se
            ),
        )
    }
}

fn c8_thermal() -> Outcome {
    let model = ThermalModel {
        t1ne: 55.0,
        device: DeviceParams::device_a(),
    };
    let omega = model.device.omega0;
    let mut plateau: f64 = 0.0;
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for i in 0..=330 {
        let t = 0.02 + 1e-3 * f64::from(i);
        let t1 = total_t1(t, &model, omega).unwrap();
        monotone &= t1 <= prev;
        prev = t1;
        if t <= 0.1 + 1e-12 {
            plateau = plateau.max((t1 / 55.0 - 1.0).abs());
        }
    }
    let mut k0: f64 = 0.0;
    for i in 0..=600 {
        let x = 0.05 * (600f64).powf(f64::from(i) / 600.0);
        let want = k0_quadrature(x);
        k0 = k0.max((analytic::bessel_k0(x).unwrap() / want - 1.0).abs());
    }
    outcome(
        plateau < 0.01 && monotone && k0 < 1e-10,
        format!("plateau error {plateau:.2e} (tol 1e-2), monotone {monotone}, K0 rel error {k0:.2e} (tol 1e-10)"),
    )
}

fn c9_flux() -> Outcome {
    let device = DeviceParams::device_a();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let f = -0.004 + 0.008 * f64::from(i) / 49.0;
        let p = t1qp_flux(f, 23.0, &device).unwrap();
        let omega = device.omega0.hypot(device.eps_slope * f);
        let (me_s, _) = device.me_small_table.lookup(f);
        let want = (device.omega0 / omega).sqrt()
            * (1.0 + device.alpha * me_s.powi(2) / device.me_large.powi(2));
        worst = worst.max((23.0 / p.t1qp_f / want - 1.0).abs());
    }
    let at_zero = t1qp_flux(0.0, 23.0, &device).unwrap().t1qp_f;
    outcome(
        worst < 1e-12 && (at_zero - 23.0).abs() < 1e-12,
        format!("50 points, max rel error {worst:.2e} (tol 1e-12), T1qp(0) = {at_zero}"),
    )
}

fn c10_determinism() -> Outcome {
    let mut config = Config::default();
    config.sim.n_trials = 20_000;
    config.pulses.counts = vec![0, 5, 20];
    let bytes = |threads| {
        let ctx = RunContext {
            seed: 110,
            quick: false,
            threads: Some(threads),
        };
        let mut files = simulate_decay(&config, &ctx).unwrap().files;
        files.extend(simulate_pump(&config, &ctx).unwrap().files);
        files
            .into_iter()
            .map(|f| (f.name, f.contents))
            .collect::<Vec<_>>()
    };
    let one = bytes(1);
    let same = [2, 8].iter().all(|&t| bytes(t) == one);
    outcome(
        same,
        format!(
            "simulate-decay and simulate-pump, {} files identical across 1, 2, 8 workers",
            one.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: &str, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.passed;
        println!(
            "{} {id} {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if let Some(info) = o.info {
            println!("INFO {id} {info}");
        }
    };
    report("1", "mixture identity", &c1_mixture_identity);
    report("2", "master-equation steady state", &c2_master_equation);
    report("3", "Monte Carlo vs closed form", &c3_monte_carlo);
    report("4", "fit round trip", &c4_fit_round_trip);
    report("5", "pumping phenomenology", &c5_pumping);
    report("6", "2pi control", &c6_two_pi_control);
    report("7", "recovery", &c7_recovery);
    report("8", "thermal curve", &c8_thermal);
    report("9", "flux relation", &c9_flux);
    report("10", "determinism", &c10_determinism);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
