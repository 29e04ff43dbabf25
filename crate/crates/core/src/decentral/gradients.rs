use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::local::{broadcast_positions, LocalView};
use super::network::{Envelope, Outbox, Payload, Protocol, RoundNetwork};
use super::power::EigenEstimate;
use super::solvers::{identity_rhs, solve_local, LinearIteration, SolverOptions};
use crate::error::{Error, Result};
use crate::fisher::{fim_block_derivative, NoiseModel};
use crate::geometry::{Configuration, NodeId};
use crate::potentials::GradientField;

/// Distributed gradient with communication statistics. The potential value is
/// not computed by the distributed algorithms and is left as NaN.
#[derive(Debug, Clone)]
pub struct DistributedGradient {
    pub field: GradientField,
    pub rounds: usize,
    pub messages: u64,
}

fn block(m: &DMatrix<f64>, n: usize, col_block: usize) -> DMatrix<f64> {
    m.view((0, n * col_block), (n, n)).into_owned()
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Final step of the D/A-opt algorithm: tags send tr(M_jj dF_ij/dxi_i) to
/// their mobile neighbors, which then assemble their gradient.
struct TraceExchange<'a> {
    views: &'a [LocalView],
    rows: &'a [DMatrix<f64>],
    noise: NoiseModel,
    dim: usize,
    tag_count: usize,
    mobile: &'a [bool],
}

impl TraceExchange<'_> {
    fn derivative(&self, i: usize, j: usize, c: usize, view_of_i: bool) -> DMatrix<f64> {
        // dF_ij / dxi_i, with p_ij taken from whichever endpoint computes it
        let p = if view_of_i { self.views[i].diff(j) } else { -self.views[j].diff(i) };
        fim_block_derivative(&p, c, &self.noise).expect("distinct neighbors")
    }
}

impl Protocol for TraceExchange<'_> {
    type State = Option<DVector<f64>>;

    fn participates(&self, node: usize) -> bool {
        node < self.tag_count || self.mobile[node]
    }

    fn init(&self, _node: usize) -> Self::State {
        None
    }

    fn on_round(&self, node: usize, round: usize, s: &mut Self::State, inbox: &[Envelope], out: &mut Outbox) {
        let n = self.dim;
        let is_tag = node < self.tag_count;
        if round == 1 {
            if is_tag {
                let m_jj = block(&self.rows[node], n, node);
                for &i in self.views[node].neighbors.keys() {
                    if !self.mobile[i] {
                        continue;
                    }
                    let t: Vec<f64> = (0..n).map(|c| frob(&m_jj, &self.derivative(i, node, c, false))).collect();
                    out.send(i, Payload::Values(t));
                }
            }
            return;
        }
        if !self.mobile[node] {
            return;
        }
        let mut g = DVector::zeros(n);
        for env in inbox {
            if let Payload::Values(t) = &env.payload {
                for c in 0..n {
                    g[c] += t[c];
                }
            }
        }
        if is_tag {
            let row = &self.rows[node];
            let m_ii = block(row, n, node);
            for &j in self.views[node].neighbors.keys() {
                let weight = if j < self.tag_count { &m_ii - block(row, n, j) * 2.0 } else { m_ii.clone() };
                for c in 0..n {
                    g[c] += frob(&weight, &self.derivative(node, j, c, true));
                }
            }
        }
        *s = Some(g);
    }
}

fn check_mobile(n_nodes: usize, mobile: &[usize]) -> Result<Vec<bool>> {
    let mut flags = vec![false; n_nodes];
    for &i in mobile {
        if i >= n_nodes {
            return Err(Error::NotMobile(i));
        }
        flags[i] = true;
    }
    Ok(flags)
}

fn exchange_traces(
    net: &mut RoundNetwork,
    views: &[LocalView],
    rows: &[DMatrix<f64>],
    noise: &NoiseModel,
    mobile: &[usize],
    flags: &[bool],
) -> Result<GradientField> {
    let graph = net.graph();
    let proto =
        TraceExchange { views, rows, noise: *noise, dim: graph.dim(), tag_count: graph.tag_count(), mobile: flags };
    let run = net.run_rounds(&proto, 2)?;
    let mut entries = BTreeMap::new();
    for &i in mobile {
        let g = run.states[i].clone().flatten().unwrap_or_else(|| DVector::zeros(graph.dim()));
        entries.insert(NodeId(i), g);
    }
    Ok(GradientField { value: f64::NAN, entries })
}

/// D-optimal gradient by position broadcast, Richardson iterations with
/// E = I (rows of F_U^{-1} at each tag) and one trace-exchange round.
pub fn distributed_dopt_gradient(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    mobile: &[usize],
    opts: &SolverOptions,
) -> Result<DistributedGradient> {
    let start_round = net.round();
    let start_msgs = net.message_count();
    let graph = net.graph();
    let flags = check_mobile(graph.node_count(), mobile)?;
    let views = broadcast_positions(net, config)?;
    let rhs = identity_rhs(graph.dim(), graph.tag_count());
    let rows = solve_local(net, &views, noise, &rhs, LinearIteration::Richardson, opts)?.x;
    let field = exchange_traces(net, &views, &rows, noise, mobile, &flags)?;
    Ok(DistributedGradient { field, rounds: net.round() - start_round, messages: net.message_count() - start_msgs })
}

/// A-optimal gradient: a first Richardson pass gives rows of F_U^{-1}, a
/// second pass with those rows as right-hand side gives rows of F_U^{-2}.
pub fn distributed_aopt_gradient(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    mobile: &[usize],
    opts: &SolverOptions,
) -> Result<DistributedGradient> {
    let start_round = net.round();
    let start_msgs = net.message_count();
    let graph = net.graph();
    let flags = check_mobile(graph.node_count(), mobile)?;
    let views = broadcast_positions(net, config)?;
    let rhs = identity_rhs(graph.dim(), graph.tag_count());
    let first = solve_local(net, &views, noise, &rhs, LinearIteration::Richardson, opts)?.x;
    let rows = solve_local(net, &views, noise, &first, LinearIteration::Richardson, opts)?.x;
    let field = exchange_traces(net, &views, &rows, noise, mobile, &flags)?;
    Ok(DistributedGradient { field, rounds: net.round() - start_round, messages: net.message_count() - start_msgs })
}

/// Tags send their eigenvector component to all neighbors; each mobile node
/// then evaluates its local quadratic forms.
struct EigExchange<'a> {
    views: &'a [LocalView],
    v: &'a [DVector<f64>],
    noise: NoiseModel,
    dim: usize,
    tag_count: usize,
    mobile: &'a [bool],
}

impl Protocol for EigExchange<'_> {
    type State = Option<DVector<f64>>;

    fn participates(&self, node: usize) -> bool {
        node < self.tag_count || self.mobile[node]
    }

    fn init(&self, _node: usize) -> Self::State {
        None
    }

    fn on_round(&self, node: usize, round: usize, s: &mut Self::State, inbox: &[Envelope], out: &mut Outbox) {
        let n = self.dim;
        let is_tag = node < self.tag_count;
        if round == 1 {
            if is_tag {
                for &j in self.views[node].neighbors.keys() {
                    if j < self.tag_count || self.mobile[j] {
                        out.send(j, Payload::Vector(self.v[node].clone()));
                    }
                }
            }
            return;
        }
        if !self.mobile[node] {
            return;
        }
        let received: BTreeMap<usize, &DVector<f64>> = inbox
            .iter()
            .filter_map(|e| match &e.payload {
                Payload::Vector(v) => Some((e.from, v)),
                _ => None,
            })
            .collect();
        let mut g = DVector::zeros(n);
        for &j in self.views[node].neighbors.keys() {
            let p = self.views[node].diff(j);
            let q = if is_tag {
                if j < self.tag_count {
                    &self.v[node] - received[&j]
                } else {
                    self.v[node].clone()
                }
            } else if j < self.tag_count {
                received[&j].clone()
            } else {
                continue;
            };
            for c in 0..n {
                let d = fim_block_derivative(&p, c, &self.noise).expect("distinct neighbors");
                g[c] += (q.transpose() * &d * &q)[(0, 0)];
            }
        }
        *s = Some(g);
    }
}

/// E-optimal gradient from per-tag eigenvector components (exact or estimated).
pub fn distributed_eopt_gradient(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    eig: &EigenEstimate,
    mobile: &[usize],
) -> Result<DistributedGradient> {
    let start_round = net.round();
    let start_msgs = net.message_count();
    let graph = net.graph();
    if eig.v.len() != graph.tag_count() {
        return Err(Error::Dimension("one eigenvector block per tag expected".into()));
    }
    let flags = check_mobile(graph.node_count(), mobile)?;
    let views = broadcast_positions(net, config)?;
    let proto = EigExchange {
        views: &views,
        v: &eig.v,
        noise: *noise,
        dim: graph.dim(),
        tag_count: graph.tag_count(),
        mobile: &flags,
    };
    let run = net.run_rounds(&proto, 2)?;
    let mut entries = BTreeMap::new();
    for &i in mobile {
        let g = run.states[i].clone().flatten().unwrap_or_else(|| DVector::zeros(graph.dim()));
        entries.insert(NodeId(i), g);
    }
    Ok(DistributedGradient {
        field: GradientField { value: -eig.lambda, entries },
        rounds: net.round() - start_round,
        messages: net.message_count() - start_msgs,
    })
}
