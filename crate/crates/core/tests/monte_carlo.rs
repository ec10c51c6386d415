use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use qpump::analytic::{decay_population, poisson_steady};
use qpump::fitting::{fit_decay, FitOptions};
use qpump::montecarlo::{recovery_experiment, run_protocol, Setup, SimOptions};
use qpump::{ArrivalEnergy, BathParams, DecayParams, DeviceParams, PulseSequence};

fn sequence(n_pulses: u32, spacing: f64, theta: f64) -> PulseSequence {
    PulseSequence {
        n_pulses,
        spacing,
        theta,
        probe_delay: 10.0,
        readout_grid: (0..=30).map(|i| 5.0 * f64::from(i)).collect(),
        repetition_period: 2000.0,
    }
}

fn plain_bath(gamma_in: f64, gamma_out: f64) -> BathParams {
    BathParams {
        gamma_in,
        gamma_out,
        delta_e: 1.46,
        energy_resolved: false,
        excitation_ratio: 1.0,
        arrival: ArrivalEnergy::Fixed,
        exit_on_relax: false,
    }
}

// Survival for an M/M/inf bath that keeps fluctuating during the readout:
// each quasiparticle present or arriving contributes exp(-c * residence time).
fn dynamic_bath_survival(t: f64, bath: &BathParams, p: &DecayParams) -> f64 {
    let (lam, mu, c) = (bath.gamma_in, bath.gamma_out, 1.0 / p.t1qp);
    let k = mu + c;
    let e1 = (mu + c * (-k * t).exp()) / k;
    let log_s =
        -t / p.t1r - (lam / mu) * (1.0 - e1) - lam * (c / k) * (t - (1.0 - (-k * t).exp()) / k);
    log_s.exp()
}

#[test]
fn fluctuating_bath_matches_exact_survival() {
    let bath = plain_bath(1.0 / 150.0, 1.0 / 300.0);
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let seq = PulseSequence {
        probe_delay: 0.0,
        ..sequence(0, 10.0, PI)
    };
    let r = run_protocol(&seq, &bath, &decay, &DeviceParams::device_a(), 50_000, 31).unwrap();
    let n = r.stats.included as f64;
    for (&t, &p) in seq.readout_grid.iter().zip(&r.trace.populations) {
        let want = dynamic_bath_survival(t, &bath, &decay);
        let se = (want * (1.0 - want) / n).sqrt().max(1e-12);
        assert!((p - want).abs() < 4.0 * se, "t = {t}: {p} vs {want}");
    }
    // the frozen-bath law overestimates survival at these rates
    let at_60 = dynamic_bath_survival(60.0, &bath, &decay);
    assert!(decay_population(60.0, &decay).unwrap() > at_60 * 1.1);
}

#[test]
fn closed_loop_fit_recovers_bath_mean() {
    let bath = plain_bath(2.5e-6, 1e-6);
    let decay = DecayParams::new(2.5, 23.0, 55.0);
    let r = run_protocol(
        &sequence(0, 10.0, PI),
        &bath,
        &decay,
        &DeviceParams::device_a(),
        50_000,
        32,
    )
    .unwrap();
    let fit = fit_decay(&r.trace, &FitOptions::default()).unwrap();
    assert!(
        (fit.params.n_avg / 2.5 - 1.0).abs() < 0.1,
        "{:?}",
        fit.params
    );
}

#[test]
fn warmup_number_is_poisson() {
    let bath = plain_bath(1.0 / 150.0, 1.0 / 300.0);
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let n_trials = 100_000u64;
    let r = run_protocol(
        &sequence(0, 10.0, PI),
        &bath,
        &decay,
        &DeviceParams::device_a(),
        n_trials,
        33,
    )
    .unwrap();
    let steady = poisson_steady(bath.gamma_in, bath.gamma_out, 40).unwrap();
    let total = r.warmup_counts.iter().sum::<u64>() as f64;
    // pool the tail so every expected count is at least 5
    let (mut chi2, mut bins) = (0.0, 0usize);
    let (mut obs_tail, mut exp_tail) = (0.0, 0.0);
    for (n, &p) in steady.probs.iter().enumerate() {
        let observed = r.warmup_counts.get(n).copied().unwrap_or(0) as f64;
        let expected = p * total;
        if expected >= 5.0 && exp_tail == 0.0 {
            chi2 += (observed - expected).powi(2) / expected;
            bins += 1;
        } else {
            obs_tail += observed;
            exp_tail += expected;
        }
    }
    obs_tail += r.warmup_counts.iter().skip(steady.probs.len()).sum::<u64>() as f64;
    chi2 += (obs_tail - exp_tail).powi(2) / exp_tail;
    bins += 1;
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(
        p_value > 1e-3,
        "chi2 = {chi2} on {bins} bins, p = {p_value}"
    );
}

#[test]
fn interval_populations_grow() {
    // Needs a bath that the pump actually depletes; see README on the default model.
    let mut bath = BathParams::device_a();
    bath.exit_on_relax = true;
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let seq = PulseSequence {
        probe_delay: 30.0,
        ..sequence(4, 30.0, PI)
    };
    let r = run_protocol(&seq, &bath, &decay, &DeviceParams::device_a(), 50_000, 34).unwrap();
    let pops = &r.interval_populations;
    assert_eq!(pops.len(), 4);
    for w in pops.windows(2) {
        assert!(
            w[1].mean > w[0].mean + 2.0 * w[0].se.hypot(w[1].se),
            "{pops:?}"
        );
    }
}

#[test]
fn probe_number_falls_with_pumping() {
    let bath = BathParams::device_a();
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let mut prev: Option<(f64, f64)> = None;
    for n in [0, 1, 2, 5, 10, 20, 40] {
        let r = run_protocol(
            &sequence(n, 10.0, PI),
            &bath,
            &decay,
            &DeviceParams::device_a(),
            20_000,
            35,
        )
        .unwrap();
        let cur = (r.probe.n_qp.mean, r.probe.n_qp.se);
        if let Some(p) = prev {
            assert!(
                cur.0 <= p.0 + 2.0 * (p.1.hypot(cur.1)),
                "N = {n}: {cur:?} after {p:?}"
            );
        }
        prev = Some(cur);
    }
}

#[test]
fn decay_is_monotone_within_noise() {
    let r = run_protocol(
        &sequence(0, 10.0, PI),
        &BathParams::device_a(),
        &DecayParams::new(2.0, 23.0, 55.0),
        &DeviceParams::device_a(),
        100_000,
        36,
    )
    .unwrap();
    let t = &r.trace;
    for i in 1..t.len() {
        let se = t.stderr[i].hypot(t.stderr[i - 1]);
        assert!(t.populations[i] <= t.populations[i - 1] + 3.0 * se);
    }
}

#[test]
fn two_pi_pulses_do_nothing() {
    let bath = BathParams::device_a();
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let dev = DeviceParams::device_a();
    let a = run_protocol(&sequence(0, 10.0, PI), &bath, &decay, &dev, 30_000, 37).unwrap();
    let b = run_protocol(
        &sequence(10, 10.0, 2.0 * PI),
        &bath,
        &decay,
        &dev,
        30_000,
        38,
    )
    .unwrap();
    for i in 0..a.trace.len() {
        let se = a.trace.stderr[i].hypot(b.trace.stderr[i]);
        assert!((a.trace.populations[i] - b.trace.populations[i]).abs() <= 3.0 * se.max(1e-12));
    }
}

#[test]
fn unpumped_recovery_is_flat() {
    let mut bath = plain_bath(1.0 / 150.0, 1.0 / 300.0);
    bath.exit_on_relax = true;
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let sim = SimOptions::default();
    let fit = FitOptions::pinned(55.0);
    let setup = Setup {
        bath: &bath,
        decay: &decay,
        device: &DeviceParams::device_a(),
        n_trials: 5_000,
        seed: 39,
        sim: &sim,
        fit: &fit,
    };
    let r = recovery_experiment(
        &sequence(0, 10.0, PI),
        &[100.0, 300.0, 600.0, 1000.0],
        &setup,
    )
    .unwrap();
    for p in &r.points {
        assert!((p.n_qp.mean - 2.0).abs() < 4.0 * p.n_qp.se, "{:?}", p.n_qp);
    }
}

#[test]
fn recovery_delays_must_increase() {
    let bath = plain_bath(1.0 / 150.0, 1.0 / 300.0);
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let sim = SimOptions::default();
    let fit = FitOptions::default();
    let setup = Setup {
        bath: &bath,
        decay: &decay,
        device: &DeviceParams::device_a(),
        n_trials: 10,
        seed: 0,
        sim: &sim,
        fit: &fit,
    };
    assert!(recovery_experiment(
        &sequence(20, 10.0, PI),
        &[100.0, 50.0, 200.0, 300.0],
        &setup
    )
    .is_err());
    assert!(recovery_experiment(&sequence(20, 10.0, PI), &[100.0, 200.0], &setup).is_err());
}

#[test]
fn thread_count_does_not_change_results() {
    let bath = BathParams::device_a();
    let decay = DecayParams::new(2.0, 23.0, 55.0);
    let dev = DeviceParams::device_a();
    let seq = sequence(5, 10.0, PI);
    let run = |threads| {
        let opts = SimOptions {
            threads: Some(threads),
            ..SimOptions::default()
        };
        qpump::montecarlo::run_protocol_with(&seq, &bath, &decay, &dev, 3_000, 40, &opts).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}
