//! Directed communication topology of the multi-agent system.
//!
//! An arc `(j, i)` means agent `j` transmits to agent `i`; `N_i`, the
//! in-neighbor set of `i`, is the set of agents it can hear. The convergence
//! guarantees of the superposition protocols require strong connectivity,
//! which is also what bounds the standard protocol at the graph diameter.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense agent identifier in `0..n`.
pub type NodeId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("topology needs at least two nodes, got {0}")]
    TooFewNodes(u32),
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("arc ({0}, {1}) references a node outside 0..{2}")]
    ArcOutOfRange(NodeId, NodeId, u32),
    #[error("node id {0} outside 0..{1}")]
    InvalidNode(NodeId, u32),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("arc density {0} outside (0, 1]")]
    InvalidDensity(f64),
}

/// Immutable directed graph `(N, A)` with cached in-neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct DirectedTopology {
    node_count: u32,
    arcs: BTreeSet<(NodeId, NodeId)>,
    in_neighbors: Vec<Vec<NodeId>>,
    out_neighbors: Vec<Vec<NodeId>>,
}

/// Wire form: `{"n": 4, "arcs": [[0,1], [1,2], ...]}`.
#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    n: u32,
    arcs: Vec<(NodeId, NodeId)>,
}

impl TryFrom<TopologyRepr> for DirectedTopology {
    type Error = GraphError;

    fn try_from(repr: TopologyRepr) -> Result<Self, GraphError> {
        DirectedTopology::new(repr.n, repr.arcs)
    }
}

impl From<DirectedTopology> for TopologyRepr {
    fn from(g: DirectedTopology) -> Self {
        TopologyRepr { n: g.node_count, arcs: g.arcs.into_iter().collect() }
    }
}

impl DirectedTopology {
    /// Builds a topology over nodes `0..n`, rejecting self-loops and
    /// out-of-range arcs. Duplicate arcs collapse.
    pub fn new(
        n: u32,
        arcs: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut set = BTreeSet::new();
        for (from, to) in arcs {
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            if from >= n || to >= n {
                return Err(GraphError::ArcOutOfRange(from, to, n));
            }
            set.insert((from, to));
        }
        let mut in_neighbors = vec![Vec::new(); n as usize];
        let mut out_neighbors = vec![Vec::new(); n as usize];
        for &(from, to) in &set {
            in_neighbors[to as usize].push(from);
            out_neighbors[from as usize].push(to);
        }
        Ok(Self { node_count: n, arcs: set, in_neighbors, out_neighbors })
    }

    /// Complete digraph on `n` nodes.
    pub fn complete(n: u32) -> Result<Self, GraphError> {
        let arcs = (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)));
        Self::new(n, arcs)
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: u32) -> Result<Self, GraphError> {
        Self::new(n, (0..n).map(|j| (j, (j + 1) % n)))
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// In-neighbor set `N_i = { j | (j, i) in A }`, sorted ascending.
    pub fn in_neighbors(&self, i: NodeId) -> Result<&[NodeId], GraphError> {
        self.in_neighbors
            .get(i as usize)
            .map(Vec::as_slice)
            .ok_or(GraphError::InvalidNode(i, self.node_count))
    }

    /// True iff a directed path exists between every ordered node pair.
    pub fn is_strongly_connected(&self) -> bool {
        self.reaches_all(&self.out_neighbors) && self.reaches_all(&self.in_neighbors)
    }

    fn reaches_all(&self, adjacency: &[Vec<NodeId>]) -> bool {
        let n = self.node_count as usize;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    /// Largest shortest-path length over all ordered pairs: the iteration
    /// bound after which the standard protocol has converged.
    pub fn diameter_bound(&self) -> Result<u32, GraphError> {
        let n = self.node_count as usize;
        let mut worst = 0u32;
        for source in 0..self.node_count {
            let mut dist = vec![u32::MAX; n];
            dist[source as usize] = 0;
            let mut queue = VecDeque::from([source]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.out_neighbors[v as usize] {
                    if dist[w as usize] == u32::MAX {
                        dist[w as usize] = dist[v as usize] + 1;
                        queue.push_back(w);
                    }
                }
            }
            for &d in &dist {
                if d == u32::MAX {
                    return Err(GraphError::NotStronglyConnected);
                }
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }

    /// Order-independent digest of `(n, arcs)`, used to assert that paired
    /// benchmark runs observed the identical topology.
    pub fn digest(&self) -> u64 {
        let mut acc = 0xcbf2_9ce4_8422_2325u64 ^ u64::from(self.node_count);
        for &(from, to) in &self.arcs {
            acc ^= (u64::from(from) << 32) | u64::from(to);
            acc = acc.wrapping_mul(0x0000_0100_0000_01B3);
        }
        acc
    }
}

/// Random strongly connected digraph: a Hamiltonian cycle over a shuffled
/// node order guarantees connectivity, then every remaining ordered pair is
/// added independently with probability `density`.
pub fn random_strongly_connected(
    n: u32,
    density: f64,
    rng: &mut impl Rng,
) -> Result<DirectedTopology, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(GraphError::InvalidDensity(density));
    }
    let mut order: Vec<NodeId> = (0..n).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut arcs: BTreeSet<(NodeId, NodeId)> = (0..n as usize)
        .map(|i| (order[i], order[(i + 1) % n as usize]))
        .collect();
    for from in 0..n {
        for to in 0..n {
            if from != to && !arcs.contains(&(from, to)) && rng.random::<f64>() < density {
                arcs.insert((from, to));
            }
        }
    }
    DirectedTopology::new(n, arcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamFactory, StreamKey};
    use proptest::prelude::*;

    fn topo(n: u32, arcs: &[(u32, u32)]) -> DirectedTopology {
        DirectedTopology::new(n, arcs.iter().copied()).unwrap()
    }

    #[test]
    fn in_neighbors_of_two_node_exchange() {
        let g = topo(2, &[(0, 1), (1, 0)]);
        assert_eq!(g.in_neighbors(1).unwrap(), &[0]);
    }

    #[test]
    fn in_neighbors_of_complete_three() {
        let g = DirectedTopology::complete(3).unwrap();
        assert_eq!(g.in_neighbors(0).unwrap(), &[1, 2]);
    }

    #[test]
    fn in_neighbors_of_four_cycle() {
        let g = DirectedTopology::cycle(4).unwrap();
        assert_eq!(g.in_neighbors(2).unwrap(), &[1]);
    }

    #[test]
    fn in_neighbors_rejects_invalid_node() {
        let g = DirectedTopology::cycle(4).unwrap();
        assert_eq!(g.in_neighbors(4), Err(GraphError::InvalidNode(4, 4)));
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(DirectedTopology::cycle(4).unwrap().is_strongly_connected());
        assert!(!topo(2, &[(0, 1)]).is_strongly_connected());
        assert!(DirectedTopology::complete(5).unwrap().is_strongly_connected());
    }

    #[test]
    fn rejects_self_loops_and_tiny_graphs() {
        assert_eq!(
            DirectedTopology::new(3, [(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        );
        assert_eq!(DirectedTopology::new(1, []).unwrap_err(), GraphError::TooFewNodes(1));
    }

    /// Brute-force all-pairs shortest path lengths by repeated BFS.
    fn bfs_all_pairs(g: &DirectedTopology) -> Option<u32> {
        let n = g.node_count();
        let mut out = vec![Vec::new(); n as usize];
        for (from, to) in g.arcs() {
            out[from as usize].push(to);
        }
        let mut worst = 0;
        for s in 0..n {
            let mut dist = vec![None; n as usize];
            dist[s as usize] = Some(0u32);
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &out[v as usize] {
                    if dist[w as usize].is_none() {
                        dist[w as usize] = Some(dist[v as usize].unwrap() + 1);
                        queue.push_back(w);
                    }
                }
            }
            for d in dist {
                worst = worst.max(d?);
            }
        }
        Some(worst)
    }

    #[test]
    fn diameter_of_complete_graph_is_one() {
        for n in 2..7 {
            assert_eq!(DirectedTopology::complete(n).unwrap().diameter_bound().unwrap(), 1);
        }
    }

    #[test]
    fn diameter_of_directed_four_cycle() {
        let g = DirectedTopology::cycle(4).unwrap();
        assert_eq!(bfs_all_pairs(&g), Some(3));
        assert_eq!(g.diameter_bound().unwrap(), 3);
    }

    #[test]
    fn diameter_of_bidirectional_path() {
        let g = topo(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]);
        assert_eq!(bfs_all_pairs(&g), Some(3));
        assert_eq!(g.diameter_bound().unwrap(), 3);
    }

    #[test]
    fn diameter_requires_strong_connectivity() {
        assert_eq!(
            topo(2, &[(0, 1)]).diameter_bound(),
            Err(GraphError::NotStronglyConnected)
        );
    }

    #[test]
    fn two_node_random_graph_is_forced() {
        for seed in 0..5 {
            let mut rng = StreamFactory::new(seed).stream(StreamKey::Topology);
            let g = random_strongly_connected(2, 0.7, &mut rng).unwrap();
            let arcs: Vec<_> = g.arcs().collect();
            assert_eq!(arcs, vec![(0, 1), (1, 0)]);
        }
    }

    #[test]
    fn random_generation_is_seed_deterministic() {
        let gen = |seed| {
            let mut rng = StreamFactory::new(seed).stream(StreamKey::Topology);
            random_strongly_connected(10, 0.3, &mut rng).unwrap()
        };
        assert_eq!(gen(42), gen(42));
        assert!(gen(42).is_strongly_connected());
        assert_ne!(gen(42), gen(43));
    }

    #[test]
    fn random_generation_rejects_bad_arguments() {
        let mut rng = StreamFactory::new(0).stream(StreamKey::Topology);
        assert_eq!(
            random_strongly_connected(1, 0.5, &mut rng).unwrap_err(),
            GraphError::TooFewNodes(1)
        );
        assert_eq!(
            random_strongly_connected(4, 0.0, &mut rng).unwrap_err(),
            GraphError::InvalidDensity(0.0)
        );
        assert_eq!(
            random_strongly_connected(4, 1.5, &mut rng).unwrap_err(),
            GraphError::InvalidDensity(1.5)
        );
    }

    #[test]
    fn digest_distinguishes_topologies() {
        let a = topo(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let b = topo(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let c = topo(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 0)]);
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn json_round_trip() {
        let g = topo(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 0)]);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"n\":4"));
        let back: DirectedTopology = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_rejects_invalid_topology() {
        let err = serde_json::from_str::<DirectedTopology>(r#"{"n":3,"arcs":[[1,1]]}"#);
        assert!(err.is_err());
    }

    /// Reachability oracle by boolean transitive closure.
    fn strongly_connected_oracle(n: u32, arcs: &BTreeSet<(u32, u32)>) -> bool {
        let n = n as usize;
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(j, i) in arcs {
            reach[j as usize][i as usize] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    reach[i][j] |= reach[i][k] && reach[k][j];
                }
            }
        }
        reach.iter().all(|row| row.iter().all(|&r| r))
    }

    proptest! {
        #[test]
        fn random_graphs_are_strongly_connected(
            seed in 0u64..1000,
            n in 2u32..30,
            density in 0.01f64..1.0,
        ) {
            let mut rng = StreamFactory::new(seed).stream(StreamKey::Topology);
            let g = random_strongly_connected(n, density, &mut rng).unwrap();
            prop_assert!(g.is_strongly_connected());
            let l = g.diameter_bound().unwrap();
            prop_assert!(l >= 1 && l < n);
        }

        #[test]
        fn connectivity_agrees_with_transitive_closure(
            n in 2u32..=5,
            arc_bits in proptest::collection::vec(any::<bool>(), 25),
        ) {
            let mut arcs = BTreeSet::new();
            let mut bit = arc_bits.iter();
            for j in 0..n {
                for i in 0..n {
                    if i != j && *bit.next().unwrap() {
                        arcs.insert((j, i));
                    }
                }
            }
            let g = DirectedTopology::new(n, arcs.iter().copied()).unwrap();
            prop_assert_eq!(g.is_strongly_connected(), strongly_connected_oracle(n, &arcs));
        }
    }
}
