use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::RangingGraph;

/// Message payloads exchanged between neighbors.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Scalar(f64),
    Values(Vec<f64>),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Payload {
    /// FNV-1a style digest, one 64-bit word at a time, over a type tag, the
    /// row count of matrices and the IEEE bits of every entry.
    pub fn digest(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |word: u64| {
            h ^= word;
            h = h.wrapping_mul(PRIME);
        };
        let (tag, data): (u8, &[f64]) = match self {
            Payload::Scalar(x) => (0, std::slice::from_ref(x)),
            Payload::Values(v) => (1, v.as_slice()),
            Payload::Vector(v) => (2, v.as_slice()),
            Payload::Matrix(m) => (3, m.as_slice()),
        };
        eat(tag as u64);
        if let Payload::Matrix(m) = self {
            eat(m.nrows() as u64);
        }
        for x in data {
            eat(x.to_bits());
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub from: usize,
    pub payload: Payload,
}

/// Outgoing messages of one node in one round.
#[derive(Debug, Default)]
pub struct Outbox {
    messages: Vec<(usize, Payload)>,
}

impl Outbox {
    pub fn send(&mut self, to: usize, payload: Payload) {
        self.messages.push((to, payload));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscriptMode {
    /// Keep one record per message.
    Full,
    /// Only count messages; locality is still enforced at send time.
    CountOnly,
}

/// A synchronous node program. Rounds are numbered from 1 within a run; a
/// message sent in round k appears in the recipient's inbox in round k+1.
pub trait Protocol {
    type State;

    fn participates(&self, _node: usize) -> bool {
        true
    }

    fn init(&self, node: usize) -> Self::State;

    fn on_round(&self, node: usize, round: usize, state: &mut Self::State, inbox: &[Envelope], out: &mut Outbox);

    /// Local residual of the iterate; convergence requires residual < tol * scale.
    fn residual(&self, _node: usize, _state: &Self::State) -> f64 {
        0.0
    }

    fn residual_scale(&self, _node: usize, _state: &Self::State) -> f64 {
        1.0
    }
}

/// Deterministic message-passing fabric over a ranging graph.
#[derive(Debug, Clone)]
pub struct RoundNetwork<'g> {
    graph: &'g RangingGraph,
    round: usize,
    mode: TranscriptMode,
    transcript: Vec<MessageRecord>,
    message_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_rounds: usize,
    pub tol: f64,
    /// Extra rounds run after all residuals drop below tol (termination
    /// agreement latency).
    pub settle_rounds: usize,
    /// Consecutive growth of the global residual that counts as divergence.
    pub divergence_window: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_rounds: 10_000, tol: 1e-10, settle_rounds: 0, divergence_window: Some(10) }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun<S> {
    pub states: Vec<Option<S>>,
    pub rounds: usize,
    /// Global residual sqrt(sum_i r_i^2) after every round.
    pub residual_history: Vec<f64>,
}

impl<S> ProtocolRun<S> {
    pub fn state(&self, node: usize) -> &S {
        self.states[node].as_ref().expect("node did not participate")
    }
}

impl<'g> RoundNetwork<'g> {
    pub fn new(graph: &'g RangingGraph) -> Self {
        Self::with_mode(graph, TranscriptMode::Full)
    }

    pub fn with_mode(graph: &'g RangingGraph, mode: TranscriptMode) -> Self {
        Self { graph, round: 0, mode, transcript: Vec::new(), message_count: 0 }
    }

    pub fn graph(&self) -> &'g RangingGraph {
        self.graph
    }

    /// Total rounds executed over all runs.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn transcript(&self) -> &[MessageRecord] {
        &self.transcript
    }

    pub fn message_count(&self) -> u64 {
        self.message_count
    }

    /// One line per message: `round,from,to,digest`.
    pub fn transcript_text(&self) -> String {
        let mut s = String::from("round,from,to,digest\n");
        for r in &self.transcript {
            s.push_str(&format!("{},{},{},{:016x}\n", r.round, r.from, r.to, r.digest));
        }
        s
    }

    fn execute<P: Protocol>(
        &mut self,
        protocol: &P,
        max_rounds: usize,
        mut stop: impl FnMut(usize, &[Option<P::State>], &[f64]) -> Result<bool>,
    ) -> Result<ProtocolRun<P::State>> {
        let n = self.graph.node_count();
        let mut states: Vec<Option<P::State>> =
            (0..n).map(|i| protocol.participates(i).then(|| protocol.init(i))).collect();
        let mut inbox: Vec<Vec<Envelope>> = vec![Vec::new(); n];
        let mut history = Vec::new();
        let mut rounds = 0;
        for r in 1..=max_rounds {
            self.round += 1;
            rounds = r;
            let mut next: Vec<Vec<Envelope>> = vec![Vec::new(); n];
            for node in 0..n {
                let Some(state) = states[node].as_mut() else { continue };
                let mut out = Outbox::default();
                protocol.on_round(node, r, state, &inbox[node], &mut out);
                for (to, payload) in out.messages {
                    if !self.graph.are_neighbors(node, to) {
                        return Err(Error::LocalityViolation { round: self.round, from: node, to });
                    }
                    self.message_count += 1;
                    if self.mode == TranscriptMode::Full {
                        self.transcript.push(MessageRecord {
                            round: self.round,
                            from: node,
                            to,
                            digest: payload.digest(),
                        });
                    }
                    next[to].push(Envelope { from: node, payload });
                }
            }
            inbox = next;
            let residuals: Vec<f64> =
                (0..n).map(|i| states[i].as_ref().map_or(0.0, |s| protocol.residual(i, s))).collect();
            history.push(residuals.iter().map(|x| x * x).sum::<f64>().sqrt());
            if stop(r, &states, &history)? {
                break;
            }
        }
        Ok(ProtocolRun { states, rounds, residual_history: history })
    }

    /// Runs until every participant's residual is below `tol * scale` (plus
    /// `settle_rounds`), or fails after `max_rounds`.
    pub fn run_protocol<P: Protocol>(&mut self, protocol: &P, opts: &RunOptions) -> Result<ProtocolRun<P::State>> {
        let mut converged_at: Option<usize> = None;
        let mut growth = 0usize;
        let mut done = false;
        let run = self.execute(protocol, opts.max_rounds, |r, states, history| {
            let k = history.len();
            if k >= 2 && history[k - 1] > history[k - 2] {
                growth += 1;
            } else {
                growth = 0;
            }
            if let Some(w) = opts.divergence_window {
                if growth >= w || !history[k - 1].is_finite() {
                    return Err(Error::Divergence { rounds: r, residual: history[k - 1] });
                }
            }
            let all_below = states.iter().enumerate().all(|(i, s)| {
                s.as_ref().is_none_or(|s| protocol.residual(i, s) < opts.tol * protocol.residual_scale(i, s))
            });
            if all_below {
                let at = *converged_at.get_or_insert(r);
                if r >= at + opts.settle_rounds {
                    done = true;
                    return Ok(true);
                }
            }
            Ok(false)
        })?;
        if !done {
            return Err(Error::NonConvergence {
                rounds: run.rounds,
                residual: run.residual_history.last().copied().unwrap_or(f64::NAN),
            });
        }
        Ok(run)
    }

    /// Runs exactly `rounds` rounds.
    pub fn run_rounds<P: Protocol>(&mut self, protocol: &P, rounds: usize) -> Result<ProtocolRun<P::State>> {
        self.execute(protocol, rounds, |_, _, _| Ok(false))
    }
}

/// Messages in a transcript that do not travel along a graph edge.
pub fn audit_locality(graph: &RangingGraph, transcript: &[MessageRecord]) -> Vec<MessageRecord> {
    transcript.iter().filter(|r| !graph.are_neighbors(r.from, r.to)).copied().collect()
}

/// Hop diameter of the tag-induced subgraph (largest over its components).
pub fn tag_diameter(graph: &RangingGraph) -> usize {
    let u = graph.tag_count();
    let mut best = 0;
    for s in 0..u {
        let mut dist = vec![usize::MAX; u];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in graph.tag_neighbors(i) {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        best = best.max(dist.iter().filter(|&&d| d != usize::MAX).copied().max().unwrap_or(0));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_graph;

    /// Node 0 starts informed and floods a token.
    struct Flood;

    impl Protocol for Flood {
        type State = bool;
        fn init(&self, node: usize) -> bool {
            node == 0
        }
        fn on_round(&self, node: usize, round: usize, s: &mut bool, inbox: &[Envelope], out: &mut Outbox) {
            let newly = !inbox.is_empty() && !*s;
            if newly {
                *s = true;
            }
            if (node == 0 && round == 1) || newly {
                for &j in GRAPH.with(|g| g.neighbors(node).to_vec()).iter() {
                    out.send(j, Payload::Scalar(1.0));
                }
            }
        }
        fn residual(&self, _node: usize, s: &bool) -> f64 {
            if *s {
                0.0
            } else {
                1.0
            }
        }
    }

    thread_local! {
        static GRAPH: RangingGraph = build_graph(2, 2, 2, &[(0, 1), (1, 2)]).unwrap();
    }

    #[test]
    fn flooding_on_path_takes_diameter_rounds() {
        // path 0-1-2-3 (anchors 2-3 implicitly linked)
        GRAPH.with(|g| {
            let mut net = RoundNetwork::new(g);
            let opts = RunOptions { tol: 0.5, divergence_window: None, ..Default::default() };
            let run = net.run_protocol(&Flood, &opts).unwrap();
            // three hops, plus the round in which node 3 reads its mailbox
            assert_eq!(run.rounds, 4);
            let first_to_3 = net.transcript().iter().filter(|r| r.to == 3).map(|r| r.round).min();
            assert_eq!(first_to_3, Some(3));
            // node 3 passes the token on in the round it reads it
            assert_eq!(net.transcript().iter().map(|r| r.round).max(), Some(4));
            assert!(audit_locality(g, net.transcript()).is_empty());
        });
    }

    #[test]
    fn infinite_tol_stops_after_one_round() {
        GRAPH.with(|g| {
            let mut net = RoundNetwork::new(g);
            let opts = RunOptions { tol: f64::INFINITY, ..Default::default() };
            assert_eq!(net.run_protocol(&Flood, &opts).unwrap().rounds, 1);
        });
    }

    #[test]
    fn transcripts_are_reproducible() {
        GRAPH.with(|g| {
            let mut a = RoundNetwork::new(g);
            let mut b = RoundNetwork::new(g);
            a.run_rounds(&Flood, 5).unwrap();
            b.run_rounds(&Flood, 5).unwrap();
            assert_eq!(a.transcript_text(), b.transcript_text());
            assert!(!a.transcript().is_empty());
        });
    }

    struct Rogue;
    impl Protocol for Rogue {
        type State = ();
        fn init(&self, _: usize) {}
        fn on_round(&self, node: usize, _: usize, _: &mut (), _: &[Envelope], out: &mut Outbox) {
            if node == 0 {
                out.send(3, Payload::Scalar(0.0));
            }
        }
    }

    #[test]
    fn non_neighbor_send_is_rejected() {
        GRAPH.with(|g| {
            let mut net = RoundNetwork::new(g);
            assert!(matches!(net.run_rounds(&Rogue, 1), Err(Error::LocalityViolation { .. })));
        });
    }

    #[test]
    fn digest_distinguishes_payloads() {
        assert_ne!(Payload::Scalar(1.0).digest(), Payload::Scalar(2.0).digest());
        assert_ne!(Payload::Values(vec![1.0]).digest(), Payload::Scalar(1.0).digest());
    }
}
