use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GnResult {
    pub x: DVector<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    /// Norm of the cost gradient 2 J^T r at `x`.
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Iterations after which the Gauss-Newton matrix is replaced by the full
/// Hessian (differenced analytic gradient). Large-residual problems near a
/// rank-deficient minimum converge very slowly without the second-order term.
const GN_ITERATIONS: usize = 10;

fn full_hessian<F>(x: &DVector<f64>, residuals: &F, grad: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for c in 0..n {
        let step = 1e-6 * x[c].abs().max(1.0);
        let mut xp = x.clone();
        xp[c] += step;
        let (r, j) = residuals(&xp);
        let g = j.transpose() * r;
        h.set_column(c, &((g - grad) / step));
    }
    (&h + h.transpose()) * 0.5
}

/// Damped Gauss-Newton (Levenberg) minimization of |r(x)|^2, switching to the
/// full Hessian after a few iterations. The damping doubles when a step
/// increases the cost and halves when it decreases it.
/// Stops when the gradient norm drops below `gtol`, or when an accepted step
/// shorter than `xtol` no longer halves it.
pub fn gauss_newton<F>(x0: &DVector<f64>, residuals: F, gtol: f64, xtol: f64, max_iter: usize) -> Result<GnResult>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = x0.clone();
    let (mut r, mut j) = residuals(&x);
    let mut cost = r.norm_squared();
    let jtj0 = j.transpose() * &j;
    let mut damping = 1e-6 * jtj0.diagonal().amax().max(1e-12);
    let mut grad_norm = f64::INFINITY;
    for it in 0..max_iter {
        let jt_r = j.transpose() * &r;
        grad_norm = 2.0 * jt_r.norm();
        if !cost.is_finite() {
            return Err(Error::Estimation("non-finite residuals".into()));
        }
        if grad_norm < gtol {
            return Ok(GnResult { x, cost, gradient_norm: grad_norm, iterations: it });
        }
        let mut h = if it < GN_ITERATIONS { j.transpose() * &j } else { full_hessian(&x, &residuals, &jt_r) };
        for k in 0..h.nrows() {
            h[(k, k)] += damping;
        }
        let Some(chol) = h.cholesky() else {
            damping *= 2.0;
            continue;
        };
        let step = -chol.solve(&jt_r);
        let trial = &x + &step;
        let (r_t, j_t) = residuals(&trial);
        let cost_t = r_t.norm_squared();
        let small = step.norm() < xtol;
        // Near the minimum the cost change drops below the rounding noise of
        // the residuals (d - d~ cancels); there a step that keeps the cost
        // within a tiny band and halves the gradient is taken as progress.
        let tie = cost_t <= cost * (1.0 + 1e-10) && 2.0 * (j_t.transpose() * &r_t).norm() < 0.5 * grad_norm;
        let accepted = cost_t.is_finite() && (cost_t <= cost || tie);
        if accepted {
            x = trial;
            r = r_t;
            j = j_t;
            cost = cost_t;
            damping = (damping * 0.5).max(1e-300);
        } else {
            damping *= 2.0;
        }
        // A tiny accepted step that barely lowers the gradient means the
        // iteration has stalled at its floor; a tiny rejected one only means
        // the damping has grown.
        if small && accepted {
            let g_new = 2.0 * (j.transpose() * &r).norm();
            if g_new >= 0.5 * grad_norm {
                return Ok(GnResult { x, cost, gradient_norm: g_new, iterations: it + 1 });
            }
        }
    }
    let jt_r = j.transpose() * &r;
    grad_norm = grad_norm.min(2.0 * jt_r.norm());
    if grad_norm < gtol {
        return Ok(GnResult { x, cost, gradient_norm: grad_norm, iterations: max_iter });
    }
    Err(Error::NonConvergence { rounds: max_iter, residual: grad_norm })
}
