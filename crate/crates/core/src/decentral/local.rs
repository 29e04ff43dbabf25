use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::network::{Envelope, Outbox, Payload, Protocol, RoundNetwork};
use crate::error::{Error, Result};
use crate::fisher::{fim_block, NoiseModel};
use crate::geometry::{Configuration, RangingGraph};

/// What a node knows after the position broadcast: its own position and the
/// positions of its one-hop neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub node: usize,
    pub position: DVector<f64>,
    pub neighbors: BTreeMap<usize, DVector<f64>>,
}

impl LocalView {
    /// p_node - p_j from local knowledge.
    pub fn diff(&self, j: usize) -> DVector<f64> {
        &self.position - &self.neighbors[&j]
    }

    /// Off-diagonal FIM block F_node,j.
    pub fn off_block(&self, j: usize, noise: &NoiseModel) -> DMatrix<f64> {
        fim_block(&self.diff(j), noise)
    }

    /// Diagonal FIM block F_node,node = -sum_j F_node,j.
    pub fn diag_block(&self, noise: &NoiseModel) -> DMatrix<f64> {
        let n = self.position.len();
        let mut d = DMatrix::zeros(n, n);
        for &j in self.neighbors.keys() {
            d -= self.off_block(j, noise);
        }
        d
    }

    /// tr(F_node,node) = sum_j w_j d_j^2, used for spectral bounds.
    pub fn diag_trace(&self, noise: &NoiseModel) -> f64 {
        self.diag_block(noise).trace()
    }
}

struct Broadcast<'a> {
    config: &'a Configuration,
    graph: &'a RangingGraph,
}

impl Protocol for Broadcast<'_> {
    type State = BTreeMap<usize, DVector<f64>>;

    fn init(&self, _node: usize) -> Self::State {
        BTreeMap::new()
    }

    fn on_round(&self, node: usize, round: usize, state: &mut Self::State, inbox: &[Envelope], out: &mut Outbox) {
        for env in inbox {
            if let Payload::Vector(p) = &env.payload {
                state.insert(env.from, p.clone());
            }
        }
        if round == 1 {
            for &j in self.graph.neighbors(node) {
                out.send(j, Payload::Vector(self.config.point_vec(node)));
            }
        }
    }
}

/// Every node sends its position to all neighbors (round 1) and reads the
/// neighbors' positions (round 2).
pub fn broadcast_positions(net: &mut RoundNetwork, config: &Configuration) -> Result<Vec<LocalView>> {
    let graph = net.graph();
    if config.len() != graph.node_count() || config.dim() != graph.dim() {
        return Err(Error::Dimension("configuration does not match graph".into()));
    }
    let run = net.run_rounds(&Broadcast { config, graph }, 2)?;
    Ok(run
        .states
        .into_iter()
        .enumerate()
        .map(|(i, s)| LocalView { node: i, position: config.point_vec(i), neighbors: s.unwrap_or_default() })
        .collect())
}
