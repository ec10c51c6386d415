use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::{fit_decay, weights, FitOptions, ParamErrors};
use crate::analytic::decay_population_unchecked;
use crate::error::{Error, Result};
use crate::params::{DecayParams, DecayTrace};
use crate::rng::StreamId;

/// Largest tolerated fraction of failed resamples.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub params: DecayParams,
    pub std: ParamErrors,
    pub n_resamples: usize,
    pub failed: usize,
}

/// Residual-resampling bootstrap of [`fit_decay`].
///
/// Residuals are standardized by the point weights before resampling, so
/// heteroscedastic traces keep their per-point error scale.
pub fn bootstrap(
    trace: &DecayTrace,
    opts: &FitOptions,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if n_resamples < 100 {
        return Err(Error::invalid(
            "bootstrap.n_resamples",
            "n_resamples must be >= 100",
        ));
    }
    let base = fit_decay(trace, opts)?;
    let w = weights(trace);
    let fitted: Vec<f64> = trace
        .delays
        .iter()
        .map(|&t| decay_population_unchecked(t, &base.params))
        .collect();
    let z: Vec<f64> = trace
        .populations
        .iter()
        .zip(&fitted)
        .zip(&w)
        .map(|((y, f), w)| (y - f) * w.sqrt())
        .collect();
    let m = trace.len();
    let resample_opts = FitOptions {
        init: Some(base.params),
        ..opts.clone()
    };

    let fits: Vec<Option<DecayParams>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamId::new(seed, i, 0).rng();
            let populations = fitted
                .iter()
                .zip(&w)
                .map(|(f, w)| (f + z[rng.random_range(0..m)] / w.sqrt()).clamp(0.0, 1.0))
                .collect();
            let sample = DecayTrace {
                populations,
                ..trace.clone()
            };
            match fit_decay(&sample, &resample_opts) {
                Ok(fit) if fit.converged => Some(fit.params),
                _ => None,
            }
        })
        .collect();

    let ok: Vec<DecayParams> = fits.into_iter().flatten().collect();
    let failed = n_resamples - ok.len();
    if failed as f64 > MAX_FAILURE_FRACTION * n_resamples as f64 {
        return Err(Error::BootstrapFailures {
            failed,
            total: n_resamples,
        });
    }
    let sd = |get: fn(&DecayParams) -> f64| {
        let n = ok.len() as f64;
        let mean = ok.iter().map(get).sum::<f64>() / n;
        (ok.iter().map(|p| (get(p) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
    };
    Ok(BootstrapResult {
        params: base.params,
        std: ParamErrors {
            n_avg: sd(|p| p.n_avg),
            t1qp: sd(|p| p.t1qp),
            t1r: opts.fix_t1r.is_none().then(|| sd(|p| p.t1r)),
        },
        n_resamples,
        failed,
    })
}
