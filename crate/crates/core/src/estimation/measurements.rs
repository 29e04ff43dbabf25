use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{NoiseKind, NoiseModel};
use crate::geometry::{ensure_compatible, Configuration, RangingGraph};

/// One measured distance per ranging pair, in graph edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub values: Vec<f64>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exact distances (noise-free measurements).
    pub fn exact(graph: &RangingGraph, config: &Configuration) -> Result<Self> {
        ensure_compatible(graph, config)?;
        let values = graph.ranging_pairs().iter().map(|&(i, j)| config.distance(i, j)).collect();
        Ok(Self { values })
    }
}

/// Independent draws d + nu (additive) or d exp(mu) (log-normal) per ranging pair.
pub fn sample_measurements<R: Rng + ?Sized>(
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<MeasurementSet> {
    ensure_compatible(graph, config)?;
    let mut values = Vec::with_capacity(graph.ranging_pair_count());
    for &(i, j) in graph.ranging_pairs() {
        let d = config.distance(i, j);
        if d == 0.0 {
            return Err(Error::SingularGeometry { i, j });
        }
        let z: f64 = rng.sample(StandardNormal);
        values.push(match noise.kind {
            NoiseKind::Additive => d + noise.sigma * z,
            NoiseKind::LogNormal => d * (noise.sigma * z).exp(),
        });
    }
    Ok(MeasurementSet { values })
}
