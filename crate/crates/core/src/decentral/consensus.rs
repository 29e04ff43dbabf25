use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::network::{Envelope, Outbox, Payload, Protocol, RoundNetwork};
use crate::error::{Error, Result};
use crate::geometry::RangingGraph;

/// Metropolis-Hastings consensus matrix on the tag subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusWeights {
    pub matrix: DMatrix<f64>,
}

impl ConsensusWeights {
    /// Weights of tag i: (i, L_ii) followed by (j, L_ij) for tag neighbors j.
    pub fn row(&self, graph: &RangingGraph, i: usize) -> Vec<(usize, f64)> {
        let mut r = vec![(i, self.matrix[(i, i)])];
        r.extend(graph.tag_neighbors(i).map(|j| (j, self.matrix[(i, j)])));
        r
    }

    /// Second-largest eigenvalue magnitude (the geometric consensus rate).
    pub fn second_eigenvalue_modulus(&self) -> f64 {
        let (vals, _) = crate::linalg::sym_eigen_sorted(&self.matrix);
        let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        mags.get(1).copied().unwrap_or(0.0)
    }
}

/// L_ij = 1 / (1 + max(|N_i|, |N_j|)) for tag neighbors, L_ii = 1 - sum_j L_ij.
pub fn metropolis_weights(graph: &RangingGraph) -> ConsensusWeights {
    let u = graph.tag_count();
    let mut l = DMatrix::zeros(u, u);
    for i in 0..u {
        let mut sum = 0.0;
        for j in graph.tag_neighbors(i) {
            let w = 1.0 / (1.0 + graph.neighbors(i).len().max(graph.neighbors(j).len()) as f64);
            l[(i, j)] = w;
            sum += w;
        }
        l[(i, i)] = 1.0 - sum;
    }
    ConsensusWeights { matrix: l }
}

struct Averaging<'a> {
    graph: &'a RangingGraph,
    weights: &'a ConsensusWeights,
    initial: &'a [f64],
}

impl Protocol for Averaging<'_> {
    type State = f64;

    fn participates(&self, node: usize) -> bool {
        self.graph.is_tag(node)
    }

    fn init(&self, node: usize) -> f64 {
        self.initial[node]
    }

    fn on_round(&self, node: usize, round: usize, s: &mut f64, inbox: &[Envelope], out: &mut Outbox) {
        if round > 1 {
            let mut next = self.weights.matrix[(node, node)] * *s;
            for env in inbox {
                if let Payload::Scalar(v) = env.payload {
                    next += self.weights.matrix[(node, env.from)] * v;
                }
            }
            *s = next;
        }
        for j in self.graph.tag_neighbors(node) {
            out.send(j, Payload::Scalar(*s));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub values: DVector<f64>,
    /// False when the tag subgraph is disconnected; values are then
    /// per-component averages.
    pub connected: bool,
}

/// `rounds` iterations of s <- L s over one-hop messages.
pub fn consensus_average(
    net: &mut RoundNetwork,
    initial: &[f64],
    weights: &ConsensusWeights,
    rounds: usize,
) -> Result<ConsensusResult> {
    let graph = net.graph();
    if initial.len() != graph.tag_count() {
        return Err(Error::Dimension("one initial value per tag expected".into()));
    }
    let proto = Averaging { graph, weights, initial };
    // round 1 only sends, each later round applies one multiplication by L
    let run = net.run_rounds(&proto, rounds + 1)?;
    let values =
        DVector::from_iterator(graph.tag_count(), run.states.iter().take(graph.tag_count()).map(|s| s.unwrap()));
    Ok(ConsensusResult { values, connected: graph.tag_components().len() <= 1 })
}

struct Discovery<'a> {
    graph: &'a RangingGraph,
}

impl Protocol for Discovery<'_> {
    type State = BTreeSet<usize>;

    fn participates(&self, node: usize) -> bool {
        self.graph.is_tag(node)
    }

    fn init(&self, node: usize) -> BTreeSet<usize> {
        BTreeSet::from([node])
    }

    fn on_round(&self, node: usize, _round: usize, s: &mut BTreeSet<usize>, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Values(ids) = &env.payload {
                s.extend(ids.iter().map(|&x| x as usize));
            }
        }
        let ids: Vec<f64> = s.iter().map(|&x| x as f64).collect();
        for j in self.graph.tag_neighbors(node) {
            out.send(j, Payload::Values(ids.clone()));
        }
    }
}

/// Every tag learns the member set of its tag-subgraph component by flooding
/// identifiers for `rounds` rounds (at least the component diameter + 1).
pub fn discover_components(net: &mut RoundNetwork, rounds: usize) -> Result<Vec<BTreeSet<usize>>> {
    let graph = net.graph();
    let run = net.run_rounds(&Discovery { graph }, rounds)?;
    Ok(run.states.into_iter().take(graph.tag_count()).map(|s| s.unwrap()).collect())
}

struct MaxFlood<'a> {
    graph: &'a RangingGraph,
    initial: &'a [f64],
}

impl Protocol for MaxFlood<'_> {
    type State = f64;

    fn init(&self, node: usize) -> f64 {
        self.initial[node]
    }

    fn on_round(&self, node: usize, _round: usize, s: &mut f64, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Scalar(v) = env.payload {
                *s = s.max(v);
            }
        }
        for &j in self.graph.neighbors(node) {
            out.send(j, Payload::Scalar(*s));
        }
    }
}

/// Max-consensus over the whole ranging graph (all nodes take part).
pub fn max_consensus(net: &mut RoundNetwork, initial: &[f64], rounds: usize) -> Result<Vec<f64>> {
    let graph = net.graph();
    if initial.len() != graph.node_count() {
        return Err(Error::Dimension("one value per node expected".into()));
    }
    let run = net.run_rounds(&MaxFlood { graph, initial }, rounds)?;
    Ok(run.states.into_iter().map(|s| s.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_graph;

    #[test]
    fn two_tag_weights() {
        let g = build_graph(2, 2, 2, &[(0, 1)]).unwrap();
        let l = metropolis_weights(&g);
        assert_eq!(l.matrix[(0, 1)], 0.5);
        assert_eq!(l.matrix[(0, 0)], 0.5);
    }

    #[test]
    fn doubly_stochastic() {
        let g = build_graph(2, 4, 3, &[(0, 1), (1, 2), (2, 3), (0, 4), (1, 5), (3, 6), (0, 2)]).unwrap();
        let l = metropolis_weights(&g);
        for i in 0..4 {
            assert!((l.matrix.row(i).sum() - 1.0).abs() < 1e-15);
            assert!((l.matrix.column(i).sum() - 1.0).abs() < 1e-15);
        }
        assert_eq!(l.matrix[(0, 3)], 0.0);
    }

    #[test]
    fn path_average() {
        let g = build_graph(2, 3, 2, &[(0, 1), (1, 2), (0, 3), (2, 4)]).unwrap();
        let l = metropolis_weights(&g);
        let mut net = RoundNetwork::new(&g);
        let r = consensus_average(&mut net, &[1.0, 2.0, 3.0], &l, 200).unwrap();
        assert!(r.connected);
        for v in r.values.iter() {
            assert!((v - 2.0).abs() < 1e-8);
        }
        let mut net = RoundNetwork::new(&g);
        let r = consensus_average(&mut net, &[4.0, 4.0, 4.0], &l, 5).unwrap();
        assert!(r.values.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn rate_bounded_by_second_eigenvalue() {
        let g = build_graph(2, 4, 2, &[(0, 1), (1, 2), (2, 3), (0, 4), (3, 5)]).unwrap();
        let l = metropolis_weights(&g);
        let rho = l.second_eigenvalue_modulus();
        let x0 = [1.0, -2.0, 5.0, 0.5];
        let mean = x0.iter().sum::<f64>() / 4.0;
        let dev0 = x0.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
        for rounds in [1, 5, 20] {
            let mut net = RoundNetwork::new(&g);
            let r = consensus_average(&mut net, &x0, &l, rounds).unwrap();
            let dev = r.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
            assert!(dev <= rho.powi(rounds as i32) * dev0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn disconnected_gives_component_means() {
        let g = build_graph(2, 4, 2, &[(0, 1), (2, 3), (0, 4), (2, 5)]).unwrap();
        let l = metropolis_weights(&g);
        let mut net = RoundNetwork::new(&g);
        let r = consensus_average(&mut net, &[1.0, 3.0, 10.0, 20.0], &l, 100).unwrap();
        assert!(!r.connected);
        assert!((r.values[0] - 2.0).abs() < 1e-10);
        assert!((r.values[3] - 15.0).abs() < 1e-10);
        let mut net = RoundNetwork::new(&g);
        let comps = discover_components(&mut net, 4).unwrap();
        assert_eq!(comps[1], BTreeSet::from([0, 1]));
        assert_eq!(comps[2], BTreeSet::from([2, 3]));
    }
}
