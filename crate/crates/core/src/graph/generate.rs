use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GraphError, HEdge, HMultigraph, NodeId};
use crate::rng::{purpose_rng, Purpose};

/// Sample `H(n, d)`: the union of `d/2` independent uniformly random
/// Hamiltonian cycles. Each cycle is a uniform random permutation of the
/// nodes, closed into a ring.
pub fn generate_h_graph(n: usize, d: usize, seed: u64) -> Result<HMultigraph, GraphError> {
    if !d.is_multiple_of(2) {
        return Err(GraphError::OddDegree(d));
    }
    if d < 2 {
        return Err(GraphError::DegreeTooSmall(d));
    }
    if n < 3 {
        return Err(GraphError::TooFewNodes(n));
    }
    let mut rng = purpose_rng(seed, Purpose::HamiltonCycles);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut edges = Vec::with_capacity(n * d / 2);
    for cycle in 1..=(d / 2) as u16 {
        order.shuffle(&mut rng);
        for i in 0..n {
            edges.push(HEdge {
                u: order[i],
                v: order[(i + 1) % n],
                cycle,
            });
        }
    }
    HMultigraph::from_edges(n, d, seed, edges)
}

/// Distinct identifiers drawn uniformly from the full 64-bit space.
pub fn assign_node_ids(n: usize, seed: u64) -> Vec<NodeId> {
    let mut rng = purpose_rng(seed, Purpose::NodeIds);
    let mut seen = HashSet::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    while ids.len() < n {
        let id: u64 = rng.gen();
        if seen.insert(id) {
            ids.push(NodeId(id));
        }
    }
    ids
}
