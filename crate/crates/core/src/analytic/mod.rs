//! Closed-form relations: the Poisson-mixture decay law, steady-state and
//! mean-recovery solutions of the birth–death bath, thermal and flux
//! dependent relaxation.

mod bessel;
mod flux;
mod thermal;

pub use bessel::{bessel_k0, bessel_k0_scaled};
pub use flux::{qubit_freq, t1qp_flux, FluxPoint};
pub use thermal::{thermal_rate, total_t1, ThermalModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DecayParams;

/// Excited-state population after a delay `t` (μs):
/// `exp(⟨n⟩(e^{−t/T̃1qp} − 1))·e^{−t/T1R}`.
pub fn decay_population(t: f64, p: &DecayParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(
            "decay_population",
            format!("delay must be >= 0, got {t}"),
        ));
    }
    Ok(decay_population_unchecked(t, p))
}

/// [`decay_population`] without the domain check; used in fit inner loops.
#[inline]
pub fn decay_population_unchecked(t: f64, p: &DecayParams) -> f64 {
    (p.n_avg * (-t / p.t1qp).exp_m1() - t / p.t1r).exp()
}

/// Delay at which the decay law falls to `1/e`, by bisection to 1e-6 μs.
pub fn one_over_e_time(p: &DecayParams) -> f64 {
    let target = -1.0;
    // log p(t) is monotone, so bisect on it directly
    let logp = |t: f64| p.n_avg * (-t / p.t1qp).exp_m1() - t / p.t1r;
    let mut lo = 0.0;
    let mut hi = 20.0 * p.t1qp.max(p.t1r);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if logp(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Truncated Poisson distribution of the quasiparticle number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSteady {
    /// `P(n)` for `n = 0..=n_max`, renormalized after truncation.
    pub probs: Vec<f64>,
    /// `Γ_in/Γ_out`.
    pub mean: f64,
    /// Mass beyond `n_max` before renormalization.
    pub tail_mass: f64,
}

/// Largest tail mass tolerated by [`poisson_steady`].
pub const POISSON_TAIL_TOL: f64 = 1e-12;

/// Steady state of the birth–death bath: Poisson with mean `Γ_in/Γ_out`.
pub fn poisson_steady(gamma_in: f64, gamma_out: f64, n_max: usize) -> Result<PoissonSteady> {
    if !(gamma_out > 0.0) {
        return Err(Error::domain(
            "poisson_steady",
            "gamma_out must be positive (no steady state)",
        ));
    }
    if !(gamma_in >= 0.0) {
        return Err(Error::domain(
            "poisson_steady",
            "gamma_in must be non-negative",
        ));
    }
    let mean = gamma_in / gamma_out;
    let probs = poisson_pmf(mean, n_max);
    let total: f64 = probs.iter().sum();
    let tail_mass = (1.0 - total).max(0.0);
    if tail_mass > POISSON_TAIL_TOL {
        return Err(Error::domain(
            "poisson_steady",
            format!("n_max = {n_max} truncates {tail_mass:.3e} of the mass for mean {mean}"),
        ));
    }
    let probs = probs.into_iter().map(|p| p / total).collect();
    Ok(PoissonSteady {
        probs,
        mean,
        tail_mass,
    })
}

/// Untruncated Poisson weights `m^n e^{−m}/n!` for `n = 0..=n_max`, computed in log space.
pub fn poisson_pmf(mean: f64, n_max: usize) -> Vec<f64> {
    if mean == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return v;
    }
    let ln_m = mean.ln();
    let mut ln_fact = 0.0;
    (0..=n_max)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            (n as f64 * ln_m - mean - ln_fact).exp()
        })
        .collect()
}

/// Mean quasiparticle number `⟨n⟩(0)e^{−Γ_out t} + ⟨n⟩_s(1 − e^{−Γ_out t})`.
pub fn mean_nqp(t: f64, n0: f64, gamma_in: f64, gamma_out: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(
            "mean_nqp",
            format!("time must be >= 0, got {t}"),
        ));
    }
    if !(gamma_out > 0.0) {
        return Err(Error::domain("mean_nqp", "gamma_out must be positive"));
    }
    let steady = gamma_in / gamma_out;
    let decay = (-gamma_out * t).exp();
    Ok(steady + (n0 - steady) * decay)
}

/// Characteristic quasiparticle excess energy from the pumping suppression
/// ratio, `δE = Δ / (2·(n_before/n_after)²)`; all energies in GHz.
pub fn energy_estimate(n_before: f64, n_after: f64, gap: f64) -> Result<f64> {
    if !(n_after > 0.0) {
        return Err(Error::domain("energy_estimate", "n_after must be positive"));
    }
    if !(n_before >= n_after) {
        return Err(Error::domain(
            "energy_estimate",
            "n_before must be >= n_after",
        ));
    }
    let ratio = n_before / n_after;
    Ok(gap / (2.0 * ratio * ratio))
}

/// Quasiparticles per Cooper pair.
pub fn xqp_upper_bound(n_avg: f64, n_cooper_pairs: f64) -> Result<f64> {
    if !(n_cooper_pairs > 0.0) {
        return Err(Error::domain(
            "xqp_upper_bound",
            "n_cooper_pairs must be positive",
        ));
    }
    Ok(n_avg / n_cooper_pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Constants;

    const REFERENCE: DecayParams = DecayParams::new(2.5, 23.0, 55.0);

    #[test]
    fn decay_limits() {
        assert_eq!(decay_population(0.0, &REFERENCE).unwrap(), 1.0);
        let p = DecayParams::new(0.0, 23.0, 55.0);
        for t in [1.0, 10.0, 100.0] {
            let v = decay_population(t, &p).unwrap();
            assert!((v - (-t / 55.0f64).exp()).abs() < 1e-15);
        }
        assert!(decay_population(-1.0, &REFERENCE).is_err());
    }

    #[test]
    fn decay_at_200us() {
        // exp(−2.5(1−e^{−200/23}))·e^{−200/55}, re-evaluated in 50-digit arithmetic
        let v = decay_population(200.0, &REFERENCE).unwrap();
        assert!(
            (v / 2.163_678_801_452_390_6e-3 - 1.0).abs() < 1e-14,
            "{v:e}"
        );
    }

    #[test]
    fn decay_strictly_decreasing_with_tail() {
        let mut prev = 1.0;
        for i in 1..1000 {
            let t = i as f64 * 0.5;
            let v = decay_population(t, &REFERENCE).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        let t = 400.0;
        let tail = (-2.5f64).exp() * (-t / 55.0f64).exp();
        assert!((decay_population(t, &REFERENCE).unwrap() / tail - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_over_e_examples() {
        let t = one_over_e_time(&DecayParams::new(0.0, 23.0, 55.0));
        assert!((t - 55.0).abs() < 1e-6);

        let t = one_over_e_time(&REFERENCE);
        assert!(t > 8.0 && t < 55.0);
        // dense-grid scan at 1e-3 μs
        let scan = (0u64..)
            .map(|k| k as f64 * 1e-3)
            .find(|&tk| decay_population(tk, &REFERENCE).unwrap() <= (-1.0f64).exp())
            .unwrap();
        assert!((t - scan).abs() <= 1e-3, "{t} vs {scan}");

        // first and last traces of a pulse-count scan: 8 μs → 26 μs as ⟨n⟩ 2.2 → 0.5, T̃1qp 20 → 7
        let first = one_over_e_time(&DecayParams::new(2.2, 20.0, 55.0));
        let last = one_over_e_time(&DecayParams::new(0.5, 7.0, 55.0));
        assert!(first < last);
    }

    #[test]
    fn one_over_e_monotone_in_t1r() {
        let mut prev = 0.0;
        for t1r in [20.0, 40.0, 55.0, 80.0, 200.0] {
            let t = one_over_e_time(&DecayParams::new(2.5, 23.0, t1r));
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn poisson_examples() {
        let d = poisson_steady(2.0, 1.0, 200).unwrap();
        assert_eq!(d.mean, 2.0);
        assert!((d.probs[0] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m: f64 = d.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((m - 2.0).abs() < 1e-12);

        let d = poisson_steady(1.0 / 150.0, 1.0 / 300.0, 200).unwrap();
        assert!((d.mean - 2.0).abs() < 1e-14);

        let d = poisson_steady(0.0, 1.0, 10).unwrap();
        assert_eq!(d.probs[0], 1.0);
        assert!(d.probs[1..].iter().all(|&p| p == 0.0));

        assert!(poisson_steady(1.0, 0.0, 200).is_err());
        assert!(poisson_steady(50.0, 1.0, 20).is_err());
    }

    #[test]
    fn mean_recovery() {
        let g = 1.0 / 300.0;
        let v = mean_nqp(300.0, 0.6, 2.0 * g, g).unwrap();
        assert!((v - (2.0 - 1.4 * (-1.0f64).exp())).abs() < 1e-14);
        for t in [0.0, 10.0, 1e4] {
            assert!((mean_nqp(t, 2.0, 2.0 * g, g).unwrap() - 2.0).abs() < 1e-14);
        }
        assert!((mean_nqp(1e6, 0.0, 2.0 * g, g).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn energy_estimate_examples() {
        let gap = Constants::CODATA.mev(0.233);
        assert!((energy_estimate(1.0, 1.0, gap).unwrap() - gap / 2.0).abs() < 1e-12);
        let de = energy_estimate(2.2, 0.5, gap).unwrap();
        assert!((de - 1.455).abs() < 0.01, "{de}");
        let mk = 1e3 * Constants::CODATA.ghz_to_kelvin(de);
        assert!((mk - 70.0).abs() < 1.0, "{mk}");
        assert!(
            (energy_estimate(8.8, 1.0, gap).unwrap() * 4.0
                - energy_estimate(4.4, 1.0, gap).unwrap())
            .abs()
                < 1e-12
        );
        assert!(energy_estimate(1.0, 0.0, gap).is_err());
    }

    #[test]
    fn xqp_examples() {
        assert!((xqp_upper_bound(2.5, 2.5e4).unwrap() - 1e-4).abs() < 1e-18);
        assert_eq!(xqp_upper_bound(0.0, 1e4).unwrap(), 0.0);
        let a = xqp_upper_bound(1.0, 1e4).unwrap();
        assert!((xqp_upper_bound(3.0, 1e4).unwrap() - 3.0 * a).abs() < 1e-18);
        assert!(xqp_upper_bound(1.0, 0.0).is_err());
    }
}
