use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::consensus::{consensus_average, discover_components, max_consensus, metropolis_weights, ConsensusWeights};
use super::local::{broadcast_positions, LocalView};
use super::network::{Envelope, Outbox, Payload, Protocol, RoundNetwork};
use crate::error::{Error, Result};
use crate::fisher::{fim, NoiseKind, NoiseModel};
use crate::geometry::{Configuration, RangingGraph};

/// Gains and loop counts of the distributed power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterParams {
    pub beta: f64,
    pub mu: f64,
    pub eta: f64,
    /// Consensus rounds per outer iteration.
    pub inner_rounds: usize,
    pub outer_iters: usize,
    /// Consensus rounds for the final normalization and Rayleigh quotient.
    pub final_rounds: usize,
    /// Optional starting vectors per tag; random when absent.
    pub initial: Option<Vec<DVector<f64>>>,
}

impl PowerIterParams {
    /// Gains from an upper bound `lambda_bar` on lambda_max(F_U):
    /// beta = 1/lambda_bar, mu = 1.5, eta = 0.5 / (beta lambda_bar + mu).
    pub fn from_bound(lambda_bar: f64) -> Self {
        let beta = 1.0 / lambda_bar;
        let mu = 1.5;
        Self {
            beta,
            mu,
            eta: 0.5 / (beta * lambda_bar + mu),
            inner_rounds: 50,
            outer_iters: 200,
            final_rounds: 200,
            initial: None,
        }
    }

    /// beta = sigma^2/(2P) with mu = 1.5 (additive) or 1.5/d_min^2 (log-normal),
    /// eta from the trace bound.
    pub fn trace_rule(graph: &RangingGraph, config: &Configuration, noise: &NoiseModel) -> Self {
        let p = graph.ranging_pair_count().max(1) as f64;
        let s2 = noise.sigma * noise.sigma;
        let beta = s2 / (2.0 * p);
        let beta_lambda_bar = match noise.kind {
            NoiseKind::Additive => 1.0,
            NoiseKind::LogNormal => {
                let dmin =
                    graph.ranging_pairs().iter().map(|&(i, j)| config.distance(i, j)).fold(f64::INFINITY, f64::min);
                1.0 / (dmin * dmin)
            }
        };
        let mu = 1.5 * beta_lambda_bar;
        Self {
            beta,
            mu,
            eta: 0.5 / (beta_lambda_bar + mu),
            inner_rounds: 50,
            outer_iters: 200,
            final_rounds: 200,
            initial: None,
        }
    }
}

/// lambda_bar = 2 max_i tr(F_ii) over tags (a Gershgorin bound on
/// lambda_max(F_U)), agreed on by max-consensus over the ranging graph.
pub fn degree_spectral_bound(net: &mut RoundNetwork, config: &Configuration, noise: &NoiseModel) -> Result<f64> {
    let graph = net.graph();
    let views = broadcast_positions(net, config)?;
    let local: Vec<f64> =
        views.iter().map(|v| if graph.is_tag(v.node) { 2.0 * v.diag_trace(noise) } else { 0.0 }).collect();
    let agreed = max_consensus(net, &local, graph.node_count())?;
    Ok(agreed[0])
}

/// Per-tag eigenvector components of the smallest eigenvalue of F_U.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenEstimate {
    pub v: Vec<DVector<f64>>,
    pub lambda: f64,
    /// Tags of the component carrying the minimum (all tags when connected).
    pub component: Vec<usize>,
    pub rounds: usize,
    /// |F_U v - lambda v| / lambda, evaluated centrally as a diagnostic.
    pub eigen_residual: f64,
}

impl EigenEstimate {
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(self.v.iter().map(|x| x.len()).sum(), self.v.iter().flat_map(|x| x.iter().copied()))
    }

    /// Wraps an exact eigenvector (stacked tag order) for use in the
    /// distributed gradient.
    pub fn from_stacked(dim: usize, v: &DVector<f64>, lambda: f64) -> Self {
        let u = v.len() / dim;
        Self {
            v: (0..u).map(|i| v.rows(dim * i, dim).into_owned()).collect(),
            lambda,
            component: (0..u).collect(),
            rounds: 0,
            eigen_residual: 0.0,
        }
    }
}

struct Degrees<'a> {
    graph: &'a RangingGraph,
}

impl Protocol for Degrees<'_> {
    type State = BTreeMap<usize, usize>;

    fn participates(&self, node: usize) -> bool {
        self.graph.is_tag(node)
    }

    fn init(&self, _node: usize) -> Self::State {
        BTreeMap::new()
    }

    fn on_round(&self, node: usize, round: usize, s: &mut Self::State, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Scalar(d) = env.payload {
                s.insert(env.from, d as usize);
            }
        }
        if round == 1 {
            let deg = self.graph.neighbors(node).len() as f64;
            for j in self.graph.tag_neighbors(node) {
                out.send(j, Payload::Scalar(deg));
            }
        }
    }
}

struct PowerLoop<'a> {
    graph: &'a RangingGraph,
    views: &'a [LocalView],
    noise: NoiseModel,
    params: &'a PowerIterParams,
    start: &'a [DVector<f64>],
    /// Metropolis row of each tag: (j, L_ij) including j = i.
    rows: &'a [Vec<(usize, f64)>],
}

struct PowerState {
    w: DVector<f64>,
    s_hat: f64,
    f_ii: DMatrix<f64>,
    off: Vec<(usize, DMatrix<f64>)>,
    neighbor_w: BTreeMap<usize, DVector<f64>>,
    step: usize,
    outer: usize,
}

impl PowerLoop<'_> {
    fn announce(&self, node: usize, s: &mut PowerState, out: &mut Outbox) {
        let n = s.w.len() as f64;
        s.s_hat = s.w.norm_squared() / n;
        let mut msg = vec![s.s_hat];
        msg.extend(s.w.iter().copied());
        for (j, _) in &s.off {
            out.send(*j, Payload::Values(msg.clone()));
        }
        let _ = node;
    }
}

impl Protocol for PowerLoop<'_> {
    type State = PowerState;

    fn participates(&self, node: usize) -> bool {
        self.graph.is_tag(node)
    }

    fn init(&self, node: usize) -> PowerState {
        let view = &self.views[node];
        let off: Vec<(usize, DMatrix<f64>)> =
            self.graph.tag_neighbors(node).map(|j| (j, view.off_block(j, &self.noise))).collect();
        PowerState {
            w: self.start[node].clone(),
            s_hat: 0.0,
            f_ii: view.diag_block(&self.noise),
            off,
            neighbor_w: BTreeMap::new(),
            step: 0,
            outer: 0,
        }
    }

    fn on_round(&self, node: usize, _round: usize, s: &mut PowerState, inbox: &[Envelope], out: &mut Outbox) {
        if s.outer >= self.params.outer_iters {
            return;
        }
        if s.step == 0 {
            self.announce(node, s, out);
            s.step = 1;
            return;
        }
        let mut received = BTreeMap::new();
        for env in inbox {
            match &env.payload {
                Payload::Values(v) => {
                    received.insert(env.from, v[0]);
                    s.neighbor_w.insert(env.from, DVector::from_column_slice(&v[1..]));
                }
                Payload::Scalar(x) => {
                    received.insert(env.from, *x);
                }
                _ => {}
            }
        }
        let mut next = 0.0;
        for &(j, l) in &self.rows[node] {
            next += l * if j == node { s.s_hat } else { received[&j] };
        }
        s.s_hat = next;
        if s.step < self.params.inner_rounds {
            for (j, _) in &s.off {
                out.send(*j, Payload::Scalar(s.s_hat));
            }
            s.step += 1;
            return;
        }
        let p = self.params;
        let mut fw = &s.f_ii * &s.w;
        for (j, f_ij) in &s.off {
            fw += f_ij * &s.neighbor_w[j];
        }
        s.w = &s.w + (&s.w * (p.mu * (1.0 - s.s_hat)) - fw * p.beta) * p.eta;
        s.outer += 1;
        if s.outer < p.outer_iters {
            self.announce(node, s, out);
            s.step = 1;
        }
    }
}

struct LocalProducts<'a> {
    graph: &'a RangingGraph,
    views: &'a [LocalView],
    noise: NoiseModel,
    v: &'a [DVector<f64>],
}

impl Protocol for LocalProducts<'_> {
    type State = f64;

    fn participates(&self, node: usize) -> bool {
        self.graph.is_tag(node)
    }

    fn init(&self, _node: usize) -> f64 {
        0.0
    }

    fn on_round(&self, node: usize, round: usize, s: &mut f64, inbox: &[Envelope], out: &mut Outbox) {
        if round == 1 {
            for j in self.graph.tag_neighbors(node) {
                out.send(j, Payload::Vector(self.v[node].clone()));
            }
            return;
        }
        let view = &self.views[node];
        let mut fv = view.diag_block(&self.noise) * &self.v[node];
        for env in inbox {
            if let Payload::Vector(vj) = &env.payload {
                fv += view.off_block(env.from, &self.noise) * vj;
            }
        }
        *s = self.v[node].dot(&fv);
    }
}

/// Anchor relay selecting the component with the smallest eigenvalue.
struct Relay<'a> {
    graph: &'a RangingGraph,
    own: &'a [(f64, usize)],
}

fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

impl Protocol for Relay<'_> {
    type State = Option<(f64, usize)>;

    fn init(&self, node: usize) -> Self::State {
        self.graph.is_tag(node).then(|| self.own[node])
    }

    fn on_round(&self, node: usize, round: usize, s: &mut Self::State, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Values(v) = &env.payload {
                let cand = (v[0], v[1] as usize);
                *s = Some(s.map_or(cand, |cur| better(cur, cand)));
            }
        }
        let Some(best) = *s else { return };
        let msg = || Payload::Values(vec![best.0, best.1 as f64]);
        let tag = self.graph.is_tag(node);
        match round {
            1 if tag => self.graph.anchor_neighbors(node).for_each(|k| out.send(k, msg())),
            2 if !tag => self.graph.anchor_neighbors(node).for_each(|k| out.send(k, msg())),
            3 if !tag => self.graph.tag_neighbors(node).for_each(|j| out.send(j, msg())),
            r if r >= 4 && tag => self.graph.tag_neighbors(node).for_each(|j| out.send(j, msg())),
            _ => {}
        }
    }
}

/// Distributed estimate of the eigenvector of lambda_min(F_U): normalized
/// gradient flow iterations with consensus-estimated norms, a final
/// normalization, and an anchor relay choosing the minimizing component
/// when the tag subgraph is disconnected.
pub fn power_iteration_eigvec<R: Rng + ?Sized>(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    params: &PowerIterParams,
    rng: &mut R,
) -> Result<EigenEstimate> {
    let start_round = net.round();
    let graph = net.graph();
    let n = graph.dim();
    let u = graph.tag_count();
    if params.inner_rounds == 0 || params.outer_iters == 0 {
        return Err(Error::InvalidParameter("power iteration needs at least one inner and one outer step".into()));
    }
    if !(params.beta > 0.0 && params.mu > 0.0 && params.eta > 0.0) {
        return Err(Error::InvalidParameter("power iteration gains must be positive".into()));
    }
    let start: Vec<DVector<f64>> = match &params.initial {
        Some(w) if w.len() == u && w.iter().all(|x| x.len() == n) => w.clone(),
        Some(_) => return Err(Error::Dimension("initial vectors must be one dim-vector per tag".into())),
        None => (0..u).map(|_| DVector::from_fn(n, |_, _| rng.sample(StandardNormal))).collect(),
    };

    let views = broadcast_positions(net, config)?;
    let degrees = net.run_rounds(&Degrees { graph }, 2)?;
    let rows: Vec<Vec<(usize, f64)>> = (0..u)
        .map(|i| {
            let known = degrees.state(i);
            let di = graph.neighbors(i).len();
            let mut row = Vec::new();
            let mut sum = 0.0;
            for j in graph.tag_neighbors(i) {
                let w = 1.0 / (1.0 + di.max(known[&j]) as f64);
                row.push((j, w));
                sum += w;
            }
            row.insert(0, (i, 1.0 - sum));
            row
        })
        .collect();
    let members = discover_components(net, u + 1)?;

    let proto = PowerLoop { graph, views: &views, noise: *noise, params, start: &start, rows: &rows };
    let run = net.run_rounds(&proto, 1 + params.inner_rounds * params.outer_iters)?;
    let w: Vec<DVector<f64>> = run.states.into_iter().take(u).map(|s| s.unwrap().w).collect();

    let weights = ConsensusWeights { matrix: metropolis_weights(graph).matrix };
    let norms: Vec<f64> = w.iter().map(|x| x.norm_squared() / n as f64).collect();
    let s_hat = consensus_average(net, &norms, &weights, params.final_rounds)?.values;
    let v: Vec<DVector<f64>> = (0..u)
        .map(|i| {
            let size = members[i].len() as f64;
            &w[i] / (n as f64 * size * s_hat[i]).sqrt()
        })
        .collect();

    let products = net.run_rounds(&LocalProducts { graph, views: &views, noise: *noise, v: &v }, 2)?;
    let q: Vec<f64> = (0..u).map(|i| *products.state(i)).collect();
    let avg = consensus_average(net, &q, &weights, params.final_rounds)?.values;
    let own: Vec<(f64, usize)> =
        (0..u).map(|i| (avg[i] * members[i].len() as f64, *members[i].iter().next().unwrap())).collect();

    let relay = net.run_rounds(&Relay { graph, own: &own }, 4 + u)?;
    let (lambda, winner) = relay.state(0).expect("tags always hold a candidate");
    let chosen: BTreeSet<usize> = members[winner].clone();
    let v: Vec<DVector<f64>> =
        (0..u).map(|i| if chosen.contains(&i) { v[i].clone() } else { DVector::zeros(n) }).collect();

    let mut est = EigenEstimate {
        v,
        lambda,
        component: chosen.into_iter().collect(),
        rounds: net.round() - start_round,
        eigen_residual: 0.0,
    };
    let f_u = fim(graph, config, noise)?.tag_block();
    let vs = est.stacked();
    est.eigen_residual = (&f_u * &vs - &vs * lambda).norm() / lambda.abs().max(f64::MIN_POSITIVE);
    Ok(est)
}
