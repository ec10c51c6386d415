//! Three-parameter exponential `a·e^{−k t} + c`, fitted by profiling over
//! the rate with the linear parameters solved exactly at each rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::decay::{check_trace, weights};
use super::lm;
use crate::error::{Error, Result};
use crate::params::DecayTrace;

const GRID_POINTS: usize = 801;
const GRID_DECADES: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub t1: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Recovery of the mean quasiparticle number, `n(t) = n_s + (n0 − n_s)·e^{−Γ_out t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryFit {
    /// μs⁻¹; zero when unidentifiable.
    pub gamma_out: f64,
    pub gamma_out_se: f64,
    pub n_steady: f64,
    pub n_steady_se: f64,
    pub n0: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

impl RecoveryFit {
    /// `1/Γ_out`, μs.
    pub fn time_constant(&self) -> f64 {
        1.0 / self.gamma_out
    }
}

struct Profile {
    rate: f64,
    amplitude: f64,
    offset: f64,
    ssr: f64,
    /// The optimum sits on the edge of the searched rate range.
    at_edge: bool,
}

fn linear_at(t: &[f64], y: &[f64], w: &[f64], rate: f64) -> (f64, f64, f64) {
    // weighted normal equations for [e^{−kt}, 1]
    let (mut s_ee, mut s_e1, mut s_11, mut s_ey, mut s_1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&ti, &yi), &wi) in t.iter().zip(y).zip(w) {
        let e = (-rate * ti).exp();
        s_ee += wi * e * e;
        s_e1 += wi * e;
        s_11 += wi;
        s_ey += wi * e * yi;
        s_1y += wi * yi;
    }
    let det = s_ee * s_11 - s_e1 * s_e1;
    let (a, c) = if det.abs() > 1e-300 {
        (
            (s_ey * s_11 - s_e1 * s_1y) / det,
            (s_ee * s_1y - s_e1 * s_ey) / det,
        )
    } else {
        (0.0, s_1y / s_11)
    };
    let ssr = t
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&ti, &yi), &wi)| wi * (a * (-rate * ti).exp() + c - yi).powi(2))
        .sum();
    (a, c, ssr)
}

fn profile(t: &[f64], y: &[f64], w: &[f64]) -> Profile {
    let t_min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (t_max - t_min).max(f64::MIN_POSITIVE);
    // shift so e^{−kt} stays representable for fast rates
    let ts: Vec<f64> = t.iter().map(|v| v - t_min).collect();
    let lo = (1e-4 / span).ln();
    let step = GRID_DECADES * std::f64::consts::LN_10 / (GRID_POINTS - 1) as f64;
    let ssr_at = |log_k: f64| linear_at(&ts, y, w, log_k.exp()).2;

    let (best, _) = (0..GRID_POINTS)
        .map(|i| (i, ssr_at(lo + i as f64 * step)))
        .fold(
            (0, f64::INFINITY),
            |acc, (i, s)| if s < acc.1 { (i, s) } else { acc },
        );
    let at_edge = best == 0 || best == GRID_POINTS - 1;

    // golden-section refinement in log rate
    let (mut a, mut b) = (
        lo + best.saturating_sub(1) as f64 * step,
        lo + (best + 1).min(GRID_POINTS - 1) as f64 * step,
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (ssr_at(c), ssr_at(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ssr_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ssr_at(d);
        }
    }
    let rate = (0.5 * (a + b)).exp();
    let (amp, offset, ssr) = linear_at(&ts, y, w, rate);
    Profile {
        rate,
        // undo the time shift
        amplitude: amp * (rate * t_min).exp(),
        offset,
        ssr,
        at_edge,
    }
}

/// Least-squares `a·e^{−t/T1} + c`, weighted by the trace's error bars when present.
pub fn fit_exponential(trace: &DecayTrace) -> Result<ExpFit> {
    check_trace(trace, 4)?;
    let w = weights(trace);
    let p = profile(&trace.delays, &trace.populations, &w);
    Ok(ExpFit {
        t1: 1.0 / p.rate,
        amplitude: p.amplitude,
        offset: p.offset,
        residual_norm: (p.ssr / trace.len() as f64).sqrt(),
        converged: !p.at_edge && p.amplitude != 0.0,
    })
}

/// Fits the mean-recovery law to `(t_delay, n)` pairs with uniform weights.
pub fn fit_recovery(series: &[(f64, f64)]) -> Result<RecoveryFit> {
    fit_recovery_weighted(series, &[])
}

/// As [`fit_recovery`], with per-point standard errors (`sigma` may be empty).
pub fn fit_recovery_weighted(series: &[(f64, f64)], sigma: &[f64]) -> Result<RecoveryFit> {
    if series.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: series.len(),
        });
    }
    if !sigma.is_empty() && sigma.len() != series.len() {
        return Err(Error::invalid(
            "recovery.sigma",
            "sigma must be empty or match the series",
        ));
    }
    if let Some(i) = series
        .iter()
        .position(|(t, n)| !t.is_finite() || !n.is_finite())
    {
        return Err(Error::invalid(
            format!("recovery[{i}]"),
            "values must be finite",
        ));
    }
    let t: Vec<f64> = series.iter().map(|p| p.0).collect();
    let y: Vec<f64> = series.iter().map(|p| p.1).collect();
    let w: Vec<f64> = if sigma.is_empty() {
        vec![1.0; y.len()]
    } else {
        sigma.iter().map(|s| 1.0 / s.max(1e-12).powi(2)).collect()
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(RecoveryFit {
            gamma_out: 0.0,
            gamma_out_se: f64::INFINITY,
            n_steady: mean,
            n_steady_se: 0.0,
            n0: mean,
            residual_norm: 0.0,
            converged: false,
        });
    }
    let p = profile(&t, &y, &w);

    // uncertainties from the analytic Jacobian of (k, a, c)
    let m = t.len();
    let jac = DMatrix::from_fn(m, 3, |i, j| {
        let e = (-p.rate * t[i]).exp();
        let sw = w[i].sqrt();
        sw * match j {
            0 => -t[i] * p.amplitude * e,
            1 => e,
            _ => 1.0,
        }
    });
    let scale = if sigma.is_empty() {
        p.ssr / (m.saturating_sub(3).max(1)) as f64
    } else {
        1.0
    };
    let cov = lm::covariance(&jac, scale);
    let resid = DVector::from_iterator(
        m,
        (0..m).map(|i| w[i].sqrt() * (p.amplitude * (-p.rate * t[i]).exp() + p.offset - y[i])),
    );
    Ok(RecoveryFit {
        gamma_out: p.rate,
        gamma_out_se: cov[0][0].max(0.0).sqrt(),
        n_steady: p.offset,
        n_steady_se: cov[2][2].max(0.0).sqrt(),
        n0: p.amplitude + p.offset,
        residual_norm: (resid.norm_squared() / m as f64).sqrt(),
        converged: !p.at_edge && p.amplitude != 0.0,
    })
}
