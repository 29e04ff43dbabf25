use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gauss_newton::gauss_newton;
use super::measurements::MeasurementSet;
use crate::constrained::{project_to_rigid_pose, rotation_exp, RigidBodySet};
use crate::error::{Error, Result};
use crate::geometry::{ensure_compatible, Configuration, RangingGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsOptions {
    pub gtol: f64,
    pub xtol: f64,
    pub max_iter: usize,
    /// Augmented-Lagrangian penalty: initial value, growth factor, outer rounds.
    pub penalty: f64,
    pub penalty_growth: f64,
    pub outer_rounds: usize,
    pub ctol: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-10,
            xtol: 1e-12,
            max_iter: 200,
            penalty: 10.0,
            penalty_growth: 10.0,
            outer_rounds: 5,
            ctol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    /// Stacked tag positions.
    pub positions: DVector<f64>,
    /// Q at the estimate.
    pub cost: f64,
    /// Norm of the gradient of Q projected on the constraint tangent space.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Largest constraint violation (0 for the unconstrained estimator).
    pub constraint_residual: f64,
    /// Fitted orientations (relative-position estimator only).
    pub thetas: Vec<Vec<f64>>,
}

struct Problem<'a> {
    graph: &'a RangingGraph,
    anchors: &'a Configuration,
    meas: &'a MeasurementSet,
}

impl<'a> Problem<'a> {
    fn new(graph: &'a RangingGraph, anchors: &'a Configuration, meas: &'a MeasurementSet) -> Result<Self> {
        ensure_compatible(graph, anchors)?;
        if meas.len() != graph.ranging_pair_count() {
            return Err(Error::Dimension(format!(
                "{} measurements for {} ranging pairs",
                meas.len(),
                graph.ranging_pair_count()
            )));
        }
        Ok(Self { graph, anchors, meas })
    }

    fn unknowns(&self) -> usize {
        self.graph.dim() * self.graph.tag_count()
    }

    fn point(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        let n = self.graph.dim();
        if self.graph.is_tag(i) {
            x.rows(n * i, n).clone_owned()
        } else {
            self.anchors.point_vec(i)
        }
    }

    /// Residuals of Q. The cost sums over tags i and their neighbours j, so a
    /// tag-tag pair appears twice; its residual carries a sqrt(2) weight.
    fn residuals(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.graph.dim();
        let pairs = self.graph.ranging_pairs();
        let mut r = DVector::zeros(pairs.len());
        let mut jac = DMatrix::zeros(pairs.len(), self.unknowns());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let w = if self.graph.is_tag(j) { 2f64.sqrt() } else { 1.0 };
            let diff = self.point(x, i) - self.point(x, j);
            let d = diff.norm();
            r[k] = w * (d - self.meas.values[k]);
            if d > 1e-12 {
                let u = diff / d * w;
                for c in 0..n {
                    jac[(k, n * i + c)] = u[c];
                    if self.graph.is_tag(j) {
                        jac[(k, n * j + c)] = -u[c];
                    }
                }
            }
        }
        (r, jac)
    }
}

/// Q(p_U) = sum_{i in U} sum_{j in N_i} (|p_i - p_j| - d~_ij)^2.
pub fn ls_cost(graph: &RangingGraph, anchors: &Configuration, meas: &MeasurementSet, x: &DVector<f64>) -> Result<f64> {
    let p = Problem::new(graph, anchors, meas)?;
    if x.len() != p.unknowns() {
        return Err(Error::Dimension(format!("expected {} coordinates, got {}", p.unknowns(), x.len())));
    }
    Ok(p.residuals(x).0.norm_squared())
}

fn check_guess(p: &Problem, guess: &DVector<f64>) -> Result<()> {
    if guess.len() != p.unknowns() {
        return Err(Error::Dimension(format!(
            "initial guess has {} coordinates, expected {}",
            guess.len(),
            p.unknowns()
        )));
    }
    Ok(())
}

/// Local minimizer of Q from `guess` (stacked tag positions).
pub fn ls_localize(
    graph: &RangingGraph,
    anchors: &Configuration,
    meas: &MeasurementSet,
    guess: &DVector<f64>,
    opts: &LsOptions,
) -> Result<LsEstimate> {
    let p = Problem::new(graph, anchors, meas)?;
    check_guess(&p, guess)?;
    let out = gauss_newton(guess, |x| p.residuals(x), opts.gtol, opts.xtol, opts.max_iter)?;
    Ok(LsEstimate {
        positions: out.x,
        cost: out.cost,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        constraint_residual: 0.0,
        thetas: Vec::new(),
    })
}

/// Intra-robot distance residuals |p_a - p_b| - d_ab and their Jacobian.
fn distance_residuals(set: &RigidBodySet, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.dim;
    let mut rows = Vec::new();
    for g in &set.groups {
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                rows.push((g.tags[a], g.tags[b], (g.offset(a) - g.offset(b)).norm()));
            }
        }
    }
    let mut c = DVector::zeros(rows.len());
    let mut jac = DMatrix::zeros(rows.len(), x.len());
    for (k, &(a, b, d)) in rows.iter().enumerate() {
        let diff = x.rows(n * a, n) - x.rows(n * b, n);
        let dist = diff.norm();
        c[k] = dist - d;
        if dist > 1e-12 {
            for i in 0..n {
                jac[(k, n * a + i)] = diff[i] / dist;
                jac[(k, n * b + i)] = -diff[i] / dist;
            }
        }
    }
    (c, jac)
}

fn projected_gradient(g: &DVector<f64>, cjac: &DMatrix<f64>) -> f64 {
    if cjac.nrows() == 0 {
        return g.norm();
    }
    let nt = cjac.transpose();
    let gram = cjac * &nt;
    match gram.clone().cholesky() {
        Some(ch) => (g - &nt * ch.solve(&(cjac * g))).norm(),
        None => g.norm(),
    }
}

/// Local minimizer of Q subject to the intra-robot distances: augmented
/// Lagrangian rounds around Gauss-Newton, then Gauss-Newton SQP steps on the
/// KKT system until the constraint residual is below `ctol`.
pub fn ls_localize_distance_constrained(
    graph: &RangingGraph,
    anchors: &Configuration,
    meas: &MeasurementSet,
    set: &RigidBodySet,
    guess: &DVector<f64>,
    opts: &LsOptions,
) -> Result<LsEstimate> {
    let p = Problem::new(graph, anchors, meas)?;
    check_guess(&p, guess)?;
    if set.dim != graph.dim() || set.tag_count != graph.tag_count() {
        return Err(Error::Dimension("rigid body set does not match the graph".into()));
    }
    let m = p.unknowns();
    let nc = distance_residuals(set, guess).0.len();
    let mut x = guess.clone();
    let mut lambda = DVector::zeros(nc);
    let mut rho = opts.penalty;
    let mut iterations = 0;
    for _ in 0..opts.outer_rounds {
        let aug = |y: &DVector<f64>| {
            let (r, j) = p.residuals(y);
            let (c, cj) = distance_residuals(set, y);
            let s = (rho / 2.0).sqrt();
            let rows = r.len();
            let mut ra = DVector::zeros(rows + nc);
            let mut ja = DMatrix::zeros(rows + nc, m);
            ra.rows_mut(0, rows).copy_from(&r);
            ja.view_mut((0, 0), (rows, m)).copy_from(&j);
            ra.rows_mut(rows, nc).copy_from(&((c + &lambda / rho) * s));
            ja.view_mut((rows, 0), (nc, m)).copy_from(&(cj * s));
            (ra, ja)
        };
        let out = match gauss_newton(&x, aug, opts.gtol, opts.xtol, opts.max_iter) {
            Ok(o) => o,
            Err(Error::NonConvergence { .. }) => {
                // Keep going: the polish below decides convergence.
                iterations += opts.max_iter;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += out.iterations;
        x = out.x;
        let (c, _) = distance_residuals(set, &x);
        lambda += &c * rho;
        rho *= opts.penalty_growth;
        if c.amax() < opts.ctol * 1e-2 {
            break;
        }
    }
    let mut pg = f64::INFINITY;
    let mut cmax = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (r, j) = p.residuals(&x);
        let (c, cj) = distance_residuals(set, &x);
        let g = 2.0 * j.transpose() * &r;
        pg = projected_gradient(&g, &cj);
        cmax = c.amax();
        if pg < opts.gtol && cmax < opts.ctol * 1e-2 {
            break;
        }
        let mut kkt = DMatrix::zeros(m + nc, m + nc);
        kkt.view_mut((0, 0), (m, m)).copy_from(&(j.transpose() * &j));
        kkt.view_mut((0, m), (m, nc)).copy_from(&cj.transpose());
        kkt.view_mut((m, 0), (nc, m)).copy_from(&cj);
        let mut rhs = DVector::zeros(m + nc);
        rhs.rows_mut(0, m).copy_from(&(-(j.transpose() * &r)));
        rhs.rows_mut(m, nc).copy_from(&(-&c));
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return Err(Error::Estimation("singular KKT system".into()));
        };
        let step = sol.rows(0, m).clone_owned();
        x += &step;
        iterations += 1;
        if step.norm() < opts.xtol {
            let (r, j) = p.residuals(&x);
            let (c, cj) = distance_residuals(set, &x);
            pg = projected_gradient(&(2.0 * j.transpose() * &r), &cj);
            cmax = c.amax();
            break;
        }
    }
    if !(cmax < opts.ctol) || !(pg < opts.gtol.max(1e-9 * (1.0 + x.norm()))) {
        return Err(Error::NonConvergence { rounds: iterations, residual: pg.max(cmax) });
    }
    let cost = p.residuals(&x).0.norm_squared();
    Ok(LsEstimate { positions: x, cost, gradient_norm: pg, iterations, constraint_residual: cmax, thetas: Vec::new() })
}

/// Local minimizer of Q over robot poses: each multi-tag robot is described by
/// its reference-tag position and heading, so the relative positions hold by
/// construction. Two-dimensional only.
pub fn ls_localize_rp_constrained(
    graph: &RangingGraph,
    anchors: &Configuration,
    meas: &MeasurementSet,
    set: &RigidBodySet,
    guess: &DVector<f64>,
    opts: &LsOptions,
) -> Result<LsEstimate> {
    let p = Problem::new(graph, anchors, meas)?;
    check_guess(&p, guess)?;
    if graph.dim() != 2 || set.dim != 2 {
        return Err(Error::InvalidParameter("the relative-position estimator is two-dimensional".into()));
    }
    if set.tag_count != graph.tag_count() {
        return Err(Error::Dimension("rigid body set does not match the graph".into()));
    }
    let robots: Vec<_> = set.multi().collect();
    let singles: Vec<usize> = {
        let mut s = set.singles();
        s.extend(set.groups.iter().filter(|g| g.len() == 1).map(|g| g.tags[0]));
        s.sort_unstable();
        s
    };
    let nr = 3 * robots.len();
    let mut y0 = DVector::zeros(nr + 2 * singles.len());
    for (k, g) in robots.iter().enumerate() {
        let desired: Vec<DVector<f64>> = g.tags.iter().map(|&t| guess.rows(2 * t, 2).clone_owned()).collect();
        let pose = project_to_rigid_pose(g, &desired)?;
        y0[3 * k] = pose.tag_positions[0][0];
        y0[3 * k + 1] = pose.tag_positions[0][1];
        y0[3 * k + 2] = pose.theta[0];
    }
    for (s, &t) in singles.iter().enumerate() {
        y0.rows_mut(nr + 2 * s, 2).copy_from(&guess.rows(2 * t, 2));
    }
    let m = p.unknowns();
    let expand = |y: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let mut x = DVector::zeros(m);
        let mut dx = DMatrix::zeros(m, y.len());
        for (k, g) in robots.iter().enumerate() {
            let base = y.rows(3 * k, 2).clone_owned();
            let rot = rotation_exp(&[y[3 * k + 2]], 2).expect("2D rotation");
            for (pos, &t) in g.tags.iter().enumerate() {
                let rel = &rot * g.relative_offset(pos);
                x.rows_mut(2 * t, 2).copy_from(&(&base + &rel));
                dx[(2 * t, 3 * k)] = 1.0;
                dx[(2 * t + 1, 3 * k + 1)] = 1.0;
                dx[(2 * t, 3 * k + 2)] = -rel[1];
                dx[(2 * t + 1, 3 * k + 2)] = rel[0];
            }
        }
        for (s, &t) in singles.iter().enumerate() {
            x.rows_mut(2 * t, 2).copy_from(&y.rows(nr + 2 * s, 2));
            dx[(2 * t, nr + 2 * s)] = 1.0;
            dx[(2 * t + 1, nr + 2 * s + 1)] = 1.0;
        }
        (x, dx)
    };
    let reduced = |y: &DVector<f64>| {
        let (x, dx) = expand(y);
        let (r, j) = p.residuals(&x);
        (r, j * dx)
    };
    let out = gauss_newton(&y0, reduced, opts.gtol, opts.xtol, opts.max_iter)?;
    let (x, _) = expand(&out.x);
    let thetas = (0..robots.len()).map(|k| vec![out.x[3 * k + 2]]).collect();
    Ok(LsEstimate {
        positions: x,
        cost: out.cost,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        constraint_residual: 0.0,
        thetas,
    })
}
