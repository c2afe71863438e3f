//! BFGS maximizer with backtracking (Armijo) line search.

use super::linalg::{cholesky, dot, identity, mat_vec, spd_inverse, Mat};

pub(crate) const GRAD_TOL: f64 = 1e-8;
pub(crate) const STEP_TOL: f64 = 1e-10;
/// Gradient level accepted when the line search can no longer improve the
/// objective (floating-point noise floor of large log-likelihood sums).
const STALL_GRAD_TOL: f64 = 1e-5;

pub(crate) struct Objective<'a> {
    /// Returns `(value, gradient)`; a non-finite value rejects the point.
    pub eval: &'a dyn Fn(&[f64]) -> (f64, Vec<f64>),
    /// Optional Hessian of the objective, used to seed the inverse-Hessian
    /// approximation when it is negative definite.
    pub hessian: Option<&'a dyn Fn(&[f64]) -> Mat>,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting with the initial
    /// point; non-decreasing by construction.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn initial_inverse(obj: &Objective, x: &[f64]) -> Mat {
    if let Some(h) = obj.hessian {
        let neg: Mat = h(x).iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        if cholesky(&neg).is_some() {
            if let Ok(inv) = spd_inverse(&neg) {
                return inv;
            }
        }
    }
    identity(x.len())
}

/// Maximizes the objective from `x0`.
pub(crate) fn maximize(obj: &Objective, x0: Vec<f64>, max_iter: usize) -> Outcome {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = (obj.eval)(&x);
    let mut h = initial_inverse(obj, &x);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        if inf_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        // Ascent direction p = H g with H approximating (-Hessian)^-1.
        let mut p = mat_vec(&h, &g);
        let mut slope = dot(&g, &p);
        if !(slope > 0.0) {
            h = identity(n);
            p = g.clone();
            slope = dot(&g, &p);
        }
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            let (ft, gt) = (obj.eval)(&trial);
            if ft.is_finite() && ft >= f + 1e-4 * t * slope {
                break Some((trial, ft, gt));
            }
            t *= 0.5;
            if t < 1e-16 {
                break None;
            }
        };
        let Some((x_new, f_new, g_new)) = accepted else {
            converged = inf_norm(&g) < STALL_GRAD_TOL;
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // Maximizing: y is the decrease of the gradient along the step.
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);

        if inf_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        if inf_norm(&s) < STEP_TOL {
            converged = inf_norm(&g) < STALL_GRAD_TOL;
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            let hy = mat_vec(&h, &y);
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    Outcome {
        x,
        value: f,
        iterations,
        converged,
        trace,
    }
}
