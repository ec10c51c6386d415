//! Modified Bessel function of the second kind, order zero.
//!
//! Below `x = 2` the ascending series
//! `K0(x) = −(ln(x/2) + γ)·I0(x) + Σ_k H_k (x²/4)^k / (k!)²` is summed
//! directly. Above it, Steed's algorithm evaluates the Thompson–Barnett
//! continued fraction for `e^x·K0(x)`, which converges in a few dozen terms
//! for all `x ≥ 2` and never forms the exponentially small value explicitly.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SPLIT: f64 = 2.0;
const EPS: f64 = 1e-17;
const MAX_ITER: usize = 10_000;

/// `K0(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check(x)?;
    if x <= SPLIT {
        Ok(series(x))
    } else {
        Ok(scaled_cf(x) * (-x).exp())
    }
}

/// `e^x·K0(x)` for `x > 0`; finite for arbitrarily large `x`.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check(x)?;
    if x <= SPLIT {
        Ok(series(x) * x.exp())
    } else {
        Ok(scaled_cf(x))
    }
}

fn check(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            "bessel_k0",
            format!("argument must be positive and finite, got {x}"),
        ))
    }
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += harmonic * term;
        if term < EPS * i0 {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + tail
}

// Steed's method for CF2 at order zero (a1 = 1/4).
fn scaled_cf(x: f64) -> f64 {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() / s
}
