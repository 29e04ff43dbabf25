use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::potentials::GradientField;

/// Backtracking parameters for the primal step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmijoParams {
    pub initial: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { initial: 1.0, contraction: 0.5, sufficient_decrease: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub config: Configuration,
    pub lambda: DVector<f64>,
    pub delta: f64,
    pub armijo: ArmijoParams,
    /// Step size accepted by the last primal update.
    pub last_eta: f64,
    /// Objective value at `config` (set after the first step).
    pub objective: f64,
}

impl PrimalDualState {
    pub fn new(config: Configuration, constraint_count: usize, delta: f64) -> Self {
        Self {
            config,
            lambda: DVector::zeros(constraint_count),
            delta,
            armijo: ArmijoParams::default(),
            last_eta: 0.0,
            objective: f64::NAN,
        }
    }
}

/// One primal-dual iteration:
/// p+ = p - eta (dJ/dp + lambda^T df/dp)^T, lambda+ = lambda + delta f(p),
/// with eta from Armijo backtracking on the Lagrangian J + lambda^T f.
///
/// `objective` returns J and its gradient over the nodes allowed to move.
/// `constraints` returns f and its Jacobian over the stacked tag coordinates.
pub fn primal_dual_step<F, G>(state: &PrimalDualState, objective: F, constraints: G) -> Result<PrimalDualState>
where
    F: Fn(&Configuration) -> Result<GradientField>,
    G: Fn(&Configuration) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let n = state.config.dim();
    let field = objective(&state.config)?;
    let (f, jac) = constraints(&state.config)?;
    if f.len() != state.lambda.len() {
        return Err(Error::Dimension(format!("{} constraints but {} multipliers", f.len(), state.lambda.len())));
    }
    let jt_lambda = jac.transpose() * &state.lambda;
    let mut direction = field.clone();
    for (node, g) in direction.entries.iter_mut() {
        let base = n * node.0;
        if base + n <= jt_lambda.len() {
            *g += jt_lambda.rows(base, n);
        }
    }
    let lagrangian = |value: f64, f: &DVector<f64>| value + state.lambda.dot(f);
    let l0 = lagrangian(field.value, &f);
    let d2: f64 = direction.entries.values().map(|g| g.norm_squared()).sum();
    let mut next = state.clone();
    next.lambda = &state.lambda + &f * state.delta;
    next.objective = field.value;
    if d2 == 0.0 {
        next.last_eta = 0.0;
        return Ok(next);
    }
    let a = state.armijo;
    let mut eta = a.initial;
    for _ in 0..=a.max_backtracks {
        let trial = moved(&state.config, &direction, eta);
        let value = objective(&trial).map(|g| g.value);
        let cons = constraints(&trial).map(|(f, _)| f);
        if let (Ok(v), Ok(fc)) = (value, cons) {
            let l = lagrangian(v, &fc);
            if l.is_finite() && l <= l0 - a.sufficient_decrease * eta * d2 {
                next.config = trial;
                next.last_eta = eta;
                next.objective = v;
                return Ok(next);
            }
        }
        eta *= a.contraction;
    }
    Err(Error::LineSearch { backtracks: a.max_backtracks })
}

fn moved(config: &Configuration, direction: &GradientField, eta: f64) -> Configuration {
    let mut out = config.clone();
    for (node, g) in &direction.entries {
        let p = config.point(node.0) - g * eta;
        out.set_point(node.0, p.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodeId;
    use std::collections::BTreeMap;

    // J(p) = |p - target|^2 for a single 2D node, constraint f(p) = p_x.
    fn quad(target: [f64; 2]) -> impl Fn(&Configuration) -> Result<GradientField> {
        move |c: &Configuration| {
            let p = c.point_vec(0);
            let t = DVector::from_vec(target.to_vec());
            let d = &p - &t;
            let mut entries = BTreeMap::new();
            entries.insert(NodeId(0), &d * 2.0);
            Ok(GradientField { value: d.norm_squared(), entries })
        }
    }

    fn px(c: &Configuration) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((DVector::from_vec(vec![c.point(0)[0]]), DMatrix::from_row_slice(1, 2, &[1.0, 0.0])))
    }

    #[test]
    fn feasible_stationary_point_is_fixed() {
        let c = Configuration::from_points(2, &[vec![0.0, 1.0]]).unwrap();
        let s = PrimalDualState::new(c.clone(), 1, 0.5);
        let next = primal_dual_step(&s, quad([0.0, 1.0]), px).unwrap();
        assert_eq!(next.config, c);
        assert_eq!(next.lambda[0], 0.0);
    }

    #[test]
    fn converges_to_constrained_minimum() {
        let c = Configuration::from_points(2, &[vec![1.0, 0.0]]).unwrap();
        let mut s = PrimalDualState::new(c, 1, 0.5);
        for _ in 0..200 {
            s = primal_dual_step(&s, quad([1.0, 2.0]), px).unwrap();
        }
        let p = s.config.point_vec(0);
        assert!(p[0].abs() < 1e-4 && (p[1] - 2.0).abs() < 1e-6);
        // Multiplier of min |p - t|^2 s.t. p_x = 0 is 2 t_x.
        assert!((s.lambda[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_delta_keeps_multiplier() {
        let c = Configuration::from_points(2, &[vec![1.0, 0.0]]).unwrap();
        let mut s = PrimalDualState::new(c, 1, 0.0);
        s.lambda[0] = 0.7;
        for _ in 0..5 {
            s = primal_dual_step(&s, quad([1.0, 2.0]), px).unwrap();
            assert_eq!(s.lambda[0], 0.7);
        }
    }
}
