use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::local::{broadcast_positions, LocalView};
use super::network::{tag_diameter, Envelope, Outbox, Payload, Protocol, RoundNetwork, RunOptions};
use crate::error::{Error, Result};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::geometry::{Configuration, RangingGraph};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearIteration {
    /// x <- x - eta (F_U x - E)
    Richardson,
    /// x_i <- (1 - eta) x_i + eta F_ii^{-1} (E_i - sum_j F_ij x_j)
    JacobiOverRelaxation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub eta: f64,
    pub max_rounds: usize,
    pub tol: f64,
    /// Agreement rounds after local convergence; `None` uses the tag-subgraph diameter.
    pub settle_rounds: Option<usize>,
}

impl SolverOptions {
    pub fn new(eta: f64) -> Self {
        Self { eta, max_rounds: 200_000, tol: 1e-10, settle_rounds: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// x_i for every tag, each dim x m.
    pub x: Vec<DMatrix<f64>>,
    pub rounds: usize,
    pub residual_history: Vec<f64>,
}

impl SolveResult {
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.x[0].nrows();
        let m = self.x[0].ncols();
        let mut out = DMatrix::zeros(n * self.x.len(), m);
        for (i, xi) in self.x.iter().enumerate() {
            out.view_mut((n * i, 0), (n, m)).copy_from(xi);
        }
        out
    }
}

/// eta = 1 / trace bound of F_U: sigma^2 / (2P) for additive noise and
/// sigma^2 d_min^2 / (2P) for log-normal noise.
pub fn default_eta(graph: &RangingGraph, config: &Configuration, noise: &NoiseModel) -> f64 {
    let p = graph.ranging_pair_count().max(1) as f64;
    let s2 = noise.sigma * noise.sigma;
    match noise.kind {
        NoiseKind::Additive => s2 / (2.0 * p),
        NoiseKind::LogNormal => {
            let dmin = graph.ranging_pairs().iter().map(|&(i, j)| config.distance(i, j)).fold(f64::INFINITY, f64::min);
            s2 * dmin * dmin / (2.0 * p)
        }
    }
}

/// Identity right-hand side: E_i = e_i^T kron I_n for every tag.
pub fn identity_rhs(dim: usize, tag_count: usize) -> Vec<DMatrix<f64>> {
    (0..tag_count)
        .map(|i| {
            let mut e = DMatrix::zeros(dim, dim * tag_count);
            for c in 0..dim {
                e[(c, dim * i + c)] = 1.0;
            }
            e
        })
        .collect()
}

struct LinearSolve<'a> {
    views: &'a [LocalView],
    tag_count: usize,
    noise: NoiseModel,
    rhs: &'a [DMatrix<f64>],
    eta: f64,
    method: LinearIteration,
}

struct SolveState {
    x: DMatrix<f64>,
    f_ii: DMatrix<f64>,
    f_ii_inv: Option<DMatrix<f64>>,
    off: Vec<(usize, DMatrix<f64>)>,
    neighbor_x: BTreeMap<usize, DMatrix<f64>>,
    residual: f64,
    scale: f64,
}

impl Protocol for LinearSolve<'_> {
    type State = SolveState;

    fn participates(&self, node: usize) -> bool {
        node < self.tag_count
    }

    fn init(&self, node: usize) -> SolveState {
        let view = &self.views[node];
        let e = &self.rhs[node];
        let off: Vec<(usize, DMatrix<f64>)> = view
            .neighbors
            .keys()
            .filter(|&&j| j < self.tag_count)
            .map(|&j| (j, view.off_block(j, &self.noise)))
            .collect();
        let f_ii = view.diag_block(&self.noise);
        let f_ii_inv = match self.method {
            LinearIteration::JacobiOverRelaxation => f_ii.clone().try_inverse(),
            LinearIteration::Richardson => None,
        };
        let zeros = DMatrix::zeros(e.nrows(), e.ncols());
        SolveState {
            x: zeros.clone(),
            f_ii,
            f_ii_inv,
            neighbor_x: off.iter().map(|(j, _)| (*j, zeros.clone())).collect(),
            off,
            residual: f64::INFINITY,
            scale: e.norm().max(1e-300),
        }
    }

    fn on_round(&self, node: usize, _round: usize, s: &mut SolveState, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Matrix(m) = &env.payload {
                s.neighbor_x.insert(env.from, m.clone());
            }
        }
        let e = &self.rhs[node];
        let mut coupling = DMatrix::zeros(e.nrows(), e.ncols());
        for (j, f_ij) in &s.off {
            coupling += f_ij * &s.neighbor_x[j];
        }
        let r = &s.f_ii * &s.x + &coupling - e;
        s.residual = r.norm();
        s.x = match self.method {
            LinearIteration::Richardson => &s.x - r * self.eta,
            LinearIteration::JacobiOverRelaxation => {
                let inv = s.f_ii_inv.as_ref().expect("checked before the run");
                &s.x * (1.0 - self.eta) + inv * (e - coupling) * self.eta
            }
        };
        for (j, _) in &s.off {
            out.send(*j, Payload::Matrix(s.x.clone()));
        }
    }

    fn residual(&self, _node: usize, s: &SolveState) -> f64 {
        s.residual
    }

    fn residual_scale(&self, _node: usize, s: &SolveState) -> f64 {
        s.scale
    }
}

/// Solves F_U X = E by local iterations over one-hop messages, given the
/// nodes' local views. Each tag i holds E_i and ends with X_i.
pub fn solve_local(
    net: &mut RoundNetwork,
    views: &[LocalView],
    noise: &NoiseModel,
    rhs: &[DMatrix<f64>],
    method: LinearIteration,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let graph = net.graph();
    let u = graph.tag_count();
    if rhs.len() != u {
        return Err(Error::Dimension(format!("expected {u} right-hand-side blocks, got {}", rhs.len())));
    }
    if !(opts.eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {}", opts.eta)));
    }
    if method == LinearIteration::JacobiOverRelaxation {
        if opts.eta > 1.0 {
            return Err(Error::InvalidParameter("Jacobi over-relaxation needs 0 < eta <= 1".into()));
        }
        for (i, view) in views.iter().enumerate().take(u) {
            let d = view.diag_block(noise);
            let (vals, _) = linalg::sym_eigen_sorted(&d);
            let top = vals[vals.len() - 1].abs();
            if !(vals[0] > 1e-12 * top) {
                return Err(Error::SingularDiagonal { tag: i });
            }
        }
    }
    let proto = LinearSolve { views, tag_count: u, noise: *noise, rhs, eta: opts.eta, method };
    let run_opts = RunOptions {
        max_rounds: opts.max_rounds,
        tol: opts.tol,
        settle_rounds: opts.settle_rounds.unwrap_or_else(|| tag_diameter(graph)),
        divergence_window: Some(10),
    };
    let run = net.run_protocol(&proto, &run_opts)?;
    let rounds = run.rounds;
    let history = run.residual_history;
    let x = run.states.into_iter().take(u).map(|s| s.expect("tags participate").x).collect();
    Ok(SolveResult { x, rounds, residual_history: history })
}

/// Position broadcast followed by Richardson iterations on F_U X = E.
pub fn richardson_solve(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    rhs: &[DMatrix<f64>],
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let views = broadcast_positions(net, config)?;
    solve_local(net, &views, noise, rhs, LinearIteration::Richardson, opts)
}

/// Position broadcast followed by Jacobi over-relaxation on F_U X = E.
pub fn jacobi_or_solve(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    rhs: &[DMatrix<f64>],
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let views = broadcast_positions(net, config)?;
    solve_local(net, &views, noise, rhs, LinearIteration::JacobiOverRelaxation, opts)
}
