//! Bounded damped least squares with a simplex fallback.

use nalgebra::{DMatrix, DVector};

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;
const DAMPING_FACTOR: f64 = 10.0;
// Objective value below which the fit is exact to rounding.
const EXACT_FLOOR: f64 = 1e-28;
const SIMPLEX_RESTARTS: usize = 3;

/// Relative central-difference step used for the Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

pub(crate) struct Problem<'a> {
    /// Weighted residuals `√w_i·(model_i(x) − y_i)`.
    pub residuals: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub jacobian: DMatrix<f64>,
    pub n_iter: usize,
    pub converged: bool,
    /// Objective after each accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
}

impl Problem<'_> {
    fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let s: f64 = (self.residuals)(x).iter().map(|r| r * r).sum();
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    }

    pub fn jacobian(&self, x: &[f64], rel_step: f64) -> DMatrix<f64> {
        let m = (self.residuals)(x).len();
        let mut jac = DMatrix::zeros(m, x.len());
        let mut xp = x.to_vec();
        for j in 0..x.len() {
            let h = rel_step * x[j].abs().max(1e-3);
            xp[j] = x[j] + h;
            let rp = (self.residuals)(&xp);
            xp[j] = x[j] - h;
            let rm = (self.residuals)(&xp);
            xp[j] = x[j];
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        jac
    }

    // Gradient with components that push against an active bound removed.
    fn projected_gradient(&self, x: &[f64], grad: &DVector<f64>) -> f64 {
        let mut norm: f64 = 0.0;
        for j in 0..x.len() {
            let g = grad[j];
            let at_lower = x[j] <= self.lower[j] && g > 0.0;
            let at_upper = x[j] >= self.upper[j] && g < 0.0;
            if !(at_lower || at_upper) {
                norm = norm.max(g.abs() * x[j].abs().max(1e-3));
            }
        }
        norm
    }
}

pub(crate) fn solve(problem: &Problem, x0: &[f64], max_iter: usize, tol: f64) -> Solution {
    let mut x = x0.to_vec();
    problem.clamp(&mut x);
    let mut history = Vec::new();
    let mut best = levenberg(problem, &x, max_iter, tol, &mut history);
    if !best.converged {
        // simplex restarts from the best point, then polish
        let mut x = best.x.clone();
        for _ in 0..SIMPLEX_RESTARTS {
            let (xs, fs) = nelder_mead(problem, &x, max_iter * 10, tol);
            if fs < *history.last().unwrap_or(&f64::INFINITY) {
                history.push(fs);
            }
            x = xs;
        }
        let polished = levenberg(problem, &x, max_iter, tol, &mut history);
        if polished.objective <= best.objective {
            best = Solution {
                n_iter: best.n_iter + polished.n_iter,
                ..polished
            };
        }
    }
    best.history = history;
    best
}

fn levenberg(
    problem: &Problem,
    x0: &[f64],
    max_iter: usize,
    tol: f64,
    history: &mut Vec<f64>,
) -> Solution {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut r = DVector::from_vec((problem.residuals)(&x));
    let mut s = r.norm_squared();
    if history.last().is_none_or(|&h| s < h) {
        history.push(s);
    }
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < max_iter {
        n_iter += 1;
        if s < EXACT_FLOOR {
            converged = true;
            break;
        }
        let jac = problem.jacobian(&x, JACOBIAN_STEP);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * &r;
        let diag_floor = 1e-12 * (0..k).map(|j| a[(j, j)]).fold(0.0, f64::max).max(1e-300);

        let mut accepted = None;
        while lambda <= LAMBDA_MAX {
            let mut m = a.clone();
            for j in 0..k {
                m[(j, j)] += lambda * a[(j, j)].max(diag_floor);
            }
            let step = m.lu().solve(&(-&g));
            if let Some(step) = step {
                let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                problem.clamp(&mut trial);
                let rt = DVector::from_vec((problem.residuals)(&trial));
                let st = rt.norm_squared();
                if st.is_finite() && st < s {
                    accepted = Some((trial, rt, st));
                    lambda = (lambda / DAMPING_FACTOR).max(LAMBDA_MIN);
                    break;
                }
            }
            lambda *= DAMPING_FACTOR;
        }

        match accepted {
            Some((trial, rt, st)) => {
                let rel = (s - st) / s;
                let moved = trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1e-3))
                    .fold(0.0, f64::max);
                x = trial;
                r = rt;
                s = st;
                history.push(s);
                if rel < tol || moved < 1e-14 {
                    converged = true;
                    break;
                }
            }
            None => {
                // no descent direction left: stationary if the projected gradient vanishes
                let pg = problem.projected_gradient(&x, &g);
                converged = pg <= tol.sqrt() * s.max(EXACT_FLOOR).sqrt() || s < EXACT_FLOOR;
                break;
            }
        }
    }
    Solution {
        jacobian: problem.jacobian(&x, JACOBIAN_STEP),
        x,
        objective: s,
        n_iter,
        converged,
        history: Vec::new(),
    }
}

// Nelder–Mead on the clamped objective. Returns the best vertex.
fn nelder_mead(problem: &Problem, x0: &[f64], max_evals: usize, tol: f64) -> (Vec<f64>, f64) {
    let k = x0.len();
    let eval = |x: &mut Vec<f64>| {
        problem.clamp(x);
        problem.objective(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let mut base = x0.to_vec();
    let f0 = eval(&mut base);
    simplex.push((base.clone(), f0));
    for j in 0..k {
        let mut v = base.clone();
        v[j] += 0.05 * v[j].abs().max(1e-2);
        if v[j] > problem.upper[j] {
            v[j] = base[j] - 0.05 * base[j].abs().max(1e-2);
        }
        let f = eval(&mut v);
        simplex.push((v, f));
    }
    let mut evals = k + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[k].1);
        if (fw - fb).abs() <= tol * fb.abs().max(EXACT_FLOOR) {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|v| v.0[j]).sum::<f64>() / k as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[k].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let mut xr = along(-1.0);
        let fr = eval(&mut xr);
        evals += 1;
        if fr < fb {
            let mut xe = along(-2.0);
            let fe = eval(&mut xe);
            evals += 1;
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let mut xc = if fr < fw { along(-0.5) } else { along(0.5) };
            let fc = eval(&mut xc);
            evals += 1;
            if fc < fw.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let mut s: Vec<f64> =
                        v.0.iter()
                            .zip(&best)
                            .map(|(a, b)| b + 0.5 * (a - b))
                            .collect();
                    let f = eval(&mut s);
                    *v = (s, f);
                }
                evals += k;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Covariance `(JᵀJ)⁺·scale` via the pseudo-inverse, symmetrized.
pub(crate) fn covariance(jac: &DMatrix<f64>, scale: f64) -> Vec<Vec<f64>> {
    let k = jac.ncols();
    let a = jac.transpose() * jac;
    let inv = a
        .clone()
        .pseudo_inverse(1e-14 * a.norm().max(1e-300))
        .unwrap_or_else(|_| DMatrix::zeros(k, k));
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)]) * scale)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_like_residuals() {
        let f = |x: &[f64]| vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]];
        let p = Problem {
            residuals: &f,
            lower: vec![-5.0, -5.0],
            upper: vec![5.0, 5.0],
        };
        let sol = solve(&p, &[-1.2, 1.0], 200, 1e-14);
        assert!(sol.converged);
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 1.0).abs() < 1e-6);
        assert!(sol.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| vec![x[0] + 3.0];
        let p = Problem {
            residuals: &f,
            lower: vec![0.0],
            upper: vec![1.0],
        };
        let sol = solve(&p, &[0.5], 100, 1e-12);
        assert_eq!(sol.x[0], 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn simplex_finds_minimum() {
        let f = |x: &[f64]| vec![x[0] - 2.0, 3.0 * (x[1] + 1.0)];
        let p = Problem {
            residuals: &f,
            lower: vec![-10.0, -10.0],
            upper: vec![10.0, 10.0],
        };
        let (x, fx) = nelder_mead(&p, &[0.0, 0.0], 5000, 1e-20);
        assert!(fx < 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-5 && (x[1] + 1.0).abs() < 1e-5);
    }
}
