use serde::{Deserialize, Serialize};

use super::lm::{self, Problem};
use crate::analytic::decay_population_unchecked;
use crate::error::{Error, Result};
use crate::params::{DecayParams, DecayTrace};

/// Error-bar floor used when building weights.
pub const WEIGHT_FLOOR: f64 = 1e-3;
const MIN_POINTS: usize = 6;

/// Closed parameter ranges `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub n_avg: [f64; 2],
    pub t1qp: [f64; 2],
    pub t1r: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            n_avg: [0.0, 20.0],
            t1qp: [0.1, 1e3],
            t1r: [0.1, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Pin `t1r` to this value (μs) and fit only `n_avg` and `t1qp`.
    pub fix_t1r: Option<f64>,
    pub init: Option<DecayParams>,
    pub bounds: Bounds,
    pub max_iter: usize,
    /// Relative objective decrease below which an accepted step ends the fit.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fix_t1r: None,
            init: None,
            bounds: Bounds::default(),
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn pinned(t1r: f64) -> Self {
        Self {
            fix_t1r: Some(t1r),
            ..Self::default()
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, [lo, hi]) in [
            ("n_avg", self.bounds.n_avg),
            ("t1qp", self.bounds.t1qp),
            ("t1r", self.bounds.t1r),
        ] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(
                    format!("{path}.bounds.{name}"),
                    format!("lower bound must be below upper bound, got [{lo}, {hi}]"),
                ));
            }
        }
        if self.bounds.t1qp[0] <= 0.0 || self.bounds.t1r[0] <= 0.0 {
            return Err(Error::invalid(
                format!("{path}.bounds"),
                "time bounds must be positive",
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(
                format!("{path}.tol"),
                "tol must be positive",
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid(
                format!("{path}.max_iter"),
                "max_iter must be >= 1",
            ));
        }
        if let Some(t) = self.fix_t1r {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(
                    format!("{path}.fix_t1r"),
                    "fix_t1r must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// One-sigma parameter uncertainties. `t1r` is absent when pinned.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamErrors {
    pub n_avg: f64,
    pub t1qp: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t1r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: DecayParams,
    pub stderr: ParamErrors,
    /// `√(Σ w_i r_i² / m)`.
    pub residual_norm: f64,
    /// Over `(n_avg, t1qp[, t1r])`.
    pub covariance: Vec<Vec<f64>>,
    pub n_iter: usize,
    pub converged: bool,
    /// Objective `Σ w_i r_i²` after each accepted iteration.
    #[serde(skip)]
    pub history: Vec<f64>,
}

pub(crate) fn weights(trace: &DecayTrace) -> Vec<f64> {
    if trace.has_stderr() {
        trace
            .stderr
            .iter()
            .map(|s| 1.0 / s.max(WEIGHT_FLOOR).powi(2))
            .collect()
    } else {
        vec![1.0; trace.len()]
    }
}

pub(crate) fn check_trace(trace: &DecayTrace, needed: usize) -> Result<()> {
    trace.validate()?;
    if trace.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: trace.len(),
        });
    }
    let (lo, hi) = trace
        .populations
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
            (a.min(p), b.max(p))
        });
    if hi - lo <= 1e-12 {
        return Err(Error::Degenerate("populations are constant".into()));
    }
    Ok(())
}

/// Partial derivatives of the decay law with respect to `(n_avg, t1qp, t1r)`
/// at each delay, by central differences with relative step `rel_step`.
pub fn model_jacobian(delays: &[f64], p: &DecayParams, rel_step: f64) -> Vec<[f64; 3]> {
    let x = [p.n_avg, p.t1qp, p.t1r];
    let at =
        |x: &[f64; 3], t: f64| decay_population_unchecked(t, &DecayParams::new(x[0], x[1], x[2]));
    delays
        .iter()
        .map(|&t| {
            let mut row = [0.0; 3];
            for j in 0..3 {
                let h = rel_step * x[j].abs().max(1e-3);
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                row[j] = (at(&xp, t) - at(&xm, t)) / (2.0 * h);
            }
            row
        })
        .collect()
}

/// Deterministic starting point: `t1r` and `n_avg` from a log-linear fit to
/// the last fifth of the trace, `t1qp` by inverting the decay law over the
/// first fifth.
pub fn initial_guess(trace: &DecayTrace, opts: &FitOptions) -> DecayParams {
    let b = &opts.bounds;
    let pts: Vec<(f64, f64)> = trace
        .delays
        .iter()
        .zip(&trace.populations)
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    let span =
        trace.delays.last().copied().unwrap_or(1.0) - trace.delays.first().copied().unwrap_or(0.0);
    let span = if span > 0.0 { span } else { 1.0 };
    let fifth = (pts.len() / 5).max(2).min(pts.len());

    let tail = &pts[pts.len() - fifth..];
    let (t1r, intercept) = match opts.fix_t1r {
        Some(t1r) => {
            let b0 = tail.iter().map(|(t, l)| l + t / t1r).sum::<f64>() / tail.len() as f64;
            (t1r, b0)
        }
        None => match line_fit(tail) {
            Some((slope, b0)) if slope < 0.0 => (-1.0 / slope, b0),
            _ => (
                10.0 * span,
                tail.first().map_or(0.0, |(t, l)| l + t / (10.0 * span)),
            ),
        },
    };
    let t1r = t1r.clamp(b.t1r[0], b.t1r[1]);
    let n_avg = (-intercept).clamp(b.n_avg[0], b.n_avg[1]).max(1e-3);

    // invert the decay law pointwise over the head and take the median
    let head = &pts[..fifth];
    let (t0, l0) = pts[0];
    let mut inverted: Vec<f64> = head[1..]
        .iter()
        .filter_map(|&(t, l)| {
            let u = 1.0 + (l - l0 + (t - t0) / t1r) / n_avg;
            (u > 0.0 && u < 1.0).then(|| -(t - t0) / u.ln())
        })
        .collect();
    inverted.sort_by(f64::total_cmp);
    let t1qp = match (inverted.len(), line_fit(head)) {
        (k, _) if k > 0 => inverted[k / 2],
        (_, Some((slope, _))) if -slope - 1.0 / t1r > 0.0 => n_avg / (-slope - 1.0 / t1r),
        _ => span / 5.0,
    };
    let t1qp = t1qp.clamp(b.t1qp[0], b.t1qp[1]);
    DecayParams::new(n_avg, t1qp, t1r)
}

fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mt))
}

fn grid_starts(span: f64, with_t1r: bool) -> Vec<Vec<f64>> {
    let span = if span > 0.0 { span } else { 1.0 };
    let mut out = Vec::new();
    for n in [0.5, 2.5] {
        for q in [span / 20.0, span / 5.0] {
            if with_t1r {
                for r in [span / 3.0, span] {
                    out.push(vec![n, q, r]);
                }
            } else {
                out.push(vec![n, q]);
            }
        }
    }
    out
}

/// Weighted least-squares fit of the decay law to `trace`.
pub fn fit_decay(trace: &DecayTrace, opts: &FitOptions) -> Result<FitResult> {
    opts.validate("fit")?;
    check_trace(trace, MIN_POINTS)?;
    let w = weights(trace);
    let sqrt_w: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
    let init = opts.init.unwrap_or_else(|| initial_guess(trace, opts));
    let b = &opts.bounds;

    let pinned = opts.fix_t1r;
    let to_params = |x: &[f64]| DecayParams::new(x[0], x[1], pinned.unwrap_or_else(|| x[2]));
    let residuals = |x: &[f64]| -> Vec<f64> {
        let p = to_params(x);
        trace
            .delays
            .iter()
            .zip(&trace.populations)
            .zip(&sqrt_w)
            .map(|((&t, &y), &sw)| sw * (decay_population_unchecked(t, &p) - y))
            .collect()
    };
    let (mut lower, mut upper) = (vec![b.n_avg[0], b.t1qp[0]], vec![b.n_avg[1], b.t1qp[1]]);
    let mut x0 = vec![init.n_avg, init.t1qp];
    if pinned.is_none() {
        lower.push(b.t1r[0]);
        upper.push(b.t1r[1]);
        x0.push(init.t1r);
    }
    let problem = Problem {
        residuals: &residuals,
        lower,
        upper,
    };
    let mut sol = lm::solve(&problem, &x0, opts.max_iter, opts.tol);
    if opts.init.is_none() {
        // The heuristic can start on the flat t1qp -> 0 edge for noisy tails,
        // so also try a coarse grid scaled to the delay span.
        let span = trace.delays.last().copied().unwrap_or(1.0)
            - trace.delays.first().copied().unwrap_or(0.0);
        for start in grid_starts(span, pinned.is_none()) {
            let x: Vec<f64> = start
                .iter()
                .zip(problem.lower.iter().zip(&problem.upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect();
            let alt = lm::solve(&problem, &x, opts.max_iter, opts.tol);
            if alt.objective < sol.objective * (1.0 - 1e-12) {
                sol = alt;
            }
        }
    }

    let m = trace.len();
    let k = x0.len();
    // absolute weights when error bars are known, otherwise scale by the residual variance
    let scale = if trace.has_stderr() {
        1.0
    } else {
        sol.objective / (m.saturating_sub(k).max(1)) as f64
    };
    let covariance = lm::covariance(&sol.jacobian, scale);
    let sd = |i: usize| covariance[i][i].max(0.0).sqrt();
    Ok(FitResult {
        params: to_params(&sol.x),
        stderr: ParamErrors {
            n_avg: sd(0),
            t1qp: sd(1),
            t1r: pinned.is_none().then(|| sd(2)),
        },
        residual_norm: (sol.objective / m as f64).sqrt(),
        covariance,
        n_iter: sol.n_iter,
        converged: sol.converged,
        history: sol.history,
    })
}
