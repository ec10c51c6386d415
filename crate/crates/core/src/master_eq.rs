//! Deterministic integration of the quasiparticle-number master equation
//!
//! `Ṗ(n) = Γ_in P(n−1) − Γ_in P(n) − nΓ_out P(n) + (n+1)Γ_out P(n+1)`
//!
//! on `n = 0..=n_max` with a reflecting upper boundary (births out of
//! `n_max` are dropped and reported as leak).

use serde::{Deserialize, Serialize};

use crate::analytic::poisson_pmf;
use crate::error::{Error, Result};
use crate::params::DecayParams;

/// Conservation tolerance checked after every integrator step.
pub const CONSERVATION_TOL: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-12;
const MAX_HALVINGS: u32 = 30;

/// Probability distribution of the quasiparticle number at a time (μs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberDistribution {
    pub probs: Vec<f64>,
    pub time: f64,
}

impl NumberDistribution {
    pub fn new(probs: Vec<f64>, time: f64) -> Result<Self> {
        let d = Self { probs, time };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `n` on `0..=n_max`.
    pub fn delta(n: usize, n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max + 1];
        probs[n.min(n_max)] = 1.0;
        Self { probs, time: 0.0 }
    }

    /// Poisson(mean) truncated at `n_max` and renormalized.
    pub fn poisson(mean: f64, n_max: usize) -> Self {
        let mut probs = poisson_pmf(mean, n_max);
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self { probs, time: 0.0 }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Total-variation distance; the shorter vector is zero-padded.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        let len = self.probs.len().max(other.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        0.5 * (0..len)
            .map(|i| (get(&self.probs, i) - get(other, i)).abs())
            .sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.is_empty() {
            return Err(Error::invalid(
                "distribution",
                "must have at least one entry",
            ));
        }
        if let Some(i) = self.probs.iter().position(|p| !(*p >= 0.0)) {
            return Err(Error::invalid(
                format!("distribution[{i}]"),
                "probabilities must be >= 0",
            ));
        }
        let total = self.total();
        if (total - 1.0).abs() > CONSERVATION_TOL {
            return Err(Error::invalid(
                "distribution",
                format!("probabilities sum to {total}"),
            ));
        }
        Ok(())
    }
}

/// Integrator diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvolveReport {
    pub steps: u64,
    pub halvings: u32,
    /// Time-integrated probability flux that the reflecting boundary suppressed.
    pub leak: f64,
}

/// Evolves `p0` for a duration `t` (μs) under constant rates.
pub fn evolve(
    p0: &NumberDistribution,
    gamma_in: f64,
    gamma_out: f64,
    t: f64,
    dt_max: f64,
) -> Result<NumberDistribution> {
    evolve_with_report(p0, gamma_in, gamma_out, t, dt_max).map(|(d, _)| d)
}

/// [`evolve`] plus integrator diagnostics.
///
/// Classic fourth-order Runge–Kutta with step `≤ 0.1/(n_max·Γ_out + Γ_in)`;
/// a step that breaks conservation or produces a negative entry below
/// `−1e−12` is retried at half the step size.
pub fn evolve_with_report(
    p0: &NumberDistribution,
    gamma_in: f64,
    gamma_out: f64,
    t: f64,
    dt_max: f64,
) -> Result<(NumberDistribution, EvolveReport)> {
    p0.validate()?;
    if !(t >= 0.0) {
        return Err(Error::domain(
            "evolve",
            format!("duration must be >= 0, got {t}"),
        ));
    }
    if !(gamma_in >= 0.0 && gamma_out >= 0.0) {
        return Err(Error::domain("evolve", "rates must be non-negative"));
    }
    if !(dt_max > 0.0) {
        return Err(Error::domain("evolve", "dt_max must be positive"));
    }
    let mut report = EvolveReport::default();
    let n_max = p0.n_max();
    let scale = n_max as f64 * gamma_out + gamma_in;
    if t == 0.0 || scale == 0.0 {
        return Ok((
            NumberDistribution {
                probs: p0.probs.clone(),
                time: p0.time + t,
            },
            report,
        ));
    }

    let stable = 0.1 / scale;
    let mut h = dt_max.min(stable);
    let gen = Generator {
        gamma_in,
        gamma_out,
    };
    let mut p = p0.probs.clone();
    let mut elapsed = 0.0;
    let mut ws = Workspace::new(p.len());
    while elapsed < t {
        let step = h.min(t - elapsed);
        let mut next = gen.rk4(&p, step, &mut ws);
        let total: f64 = next.iter().sum();
        let most_negative = next.iter().copied().fold(0.0, f64::min);
        if (total - 1.0).abs() > CONSERVATION_TOL || most_negative < -NEGATIVE_TOL {
            if report.halvings >= MAX_HALVINGS {
                return Err(Error::domain(
                    "evolve",
                    "step size underflow while enforcing conservation",
                ));
            }
            h *= 0.5;
            report.halvings += 1;
            continue;
        }
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        report.leak += gamma_in * 0.5 * (p[n_max] + next[n_max]) * step;
        p = next;
        elapsed += step;
        report.steps += 1;
    }
    Ok((
        NumberDistribution {
            probs: p,
            time: p0.time + t,
        },
        report,
    ))
}

struct Generator {
    gamma_in: f64,
    gamma_out: f64,
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

impl Generator {
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n_max = p.len() - 1;
        for n in 0..=n_max {
            let birth_out = if n < n_max { self.gamma_in * p[n] } else { 0.0 };
            let birth_in = if n > 0 { self.gamma_in * p[n - 1] } else { 0.0 };
            let death_out = n as f64 * self.gamma_out * p[n];
            let death_in = if n < n_max {
                (n + 1) as f64 * self.gamma_out * p[n + 1]
            } else {
                0.0
            };
            out[n] = birth_in - birth_out - death_out + death_in;
        }
    }

    fn rk4(&self, p: &[f64], h: f64, ws: &mut Workspace) -> Vec<f64> {
        fn stage(tmp: &mut [f64], p: &[f64], a: f64, k: &[f64]) {
            for ((t, x), d) in tmp.iter_mut().zip(p).zip(k) {
                *t = x + a * d;
            }
        }
        self.apply(p, &mut ws.k1);
        stage(&mut ws.tmp, p, 0.5 * h, &ws.k1);
        self.apply(&ws.tmp, &mut ws.k2);
        stage(&mut ws.tmp, p, 0.5 * h, &ws.k2);
        self.apply(&ws.tmp, &mut ws.k3);
        stage(&mut ws.tmp, p, h, &ws.k3);
        self.apply(&ws.tmp, &mut ws.k4);
        (0..p.len())
            .map(|i| p[i] + h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]))
            .collect()
    }
}

/// Qubit survival averaged over a number distribution:
/// `Σ_n P(n)·e^{−n t/T̃1qp}·e^{−t/T1R}`.
pub fn decay_oracle(dist: &NumberDistribution, p: &DecayParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(
            "decay_oracle",
            format!("delay must be >= 0, got {t}"),
        ));
    }
    let per_qp = (-t / p.t1qp).exp();
    let mut weight = 1.0;
    let mut acc = 0.0;
    for &pn in &dist.probs {
        acc += pn * weight;
        weight *= per_qp;
    }
    Ok(acc * (-t / p.t1r).exp())
}
