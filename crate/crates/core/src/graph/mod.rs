//! Two-layer network topology.
//!
//! `H` is a `d`-regular multigraph built as the union of `d/2` random
//! Hamiltonian cycles. `L` links every pair of nodes within `H`-distance
//! `k = ceil(d/3)`. The network `G = H ∪ L` is sparse, expanding and highly
//! clustered. Nodes are addressed by dense indices `0..n`; the random 64-bit
//! [`NodeId`] attached to each index is what would travel on a real wire.

mod classify;
mod generate;
mod io;
mod metric;
mod spectral;

pub use classify::{
    byzantine_count, byzantine_path_from, classify_nodes, default_a_radius, longest_byzantine_chain, place_byzantine,
    NodeClassification, NodeSet,
};
pub use generate::{assign_node_ids, generate_h_graph};
pub use io::{read_graph, write_graph};
pub use metric::{
    ball, boundary, census_non_tree_like, default_tree_radius, g_distance_from_set, h_distance_from_set,
    is_locally_tree_like, tree_ball_size, Bfs,
};
pub use spectral::{estimate_spectral_gap, estimate_spectral_gap_with_tolerance, SpectralEstimate, DEFAULT_TOLERANCE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("degree must be even, got {0}")]
    OddDegree(usize),
    #[error("degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("need at least 3 nodes for a Hamiltonian cycle, got {0}")]
    TooFewNodes(usize),
    #[error("delta must lie in (3/d, 1] = ({lo:.4}, 1], got {delta}")]
    DeltaOutOfRange { delta: f64, lo: f64 },
    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("malformed graph file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 64-bit node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// One edge of `H`, labelled with the Hamiltonian cycle (1-based) it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HEdge {
    pub u: u32,
    pub v: u32,
    pub cycle: u16,
}

/// Port-labelled multigraph `H`. Parallel edges are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HMultigraph {
    n: usize,
    d: usize,
    seed: u64,
    edges: Vec<HEdge>,
    offsets: Vec<usize>,
    adj: Vec<u32>,
    ports: Vec<u16>,
    ids: Vec<NodeId>,
}

impl HMultigraph {
    /// Build from an explicit edge list. Degrees are not checked here, so
    /// test fixtures may use irregular graphs; see [`HMultigraph::validate`].
    pub fn from_edges(n: usize, d: usize, seed: u64, edges: Vec<HEdge>) -> Result<Self, GraphError> {
        let mut degree = vec![0usize; n];
        for e in &edges {
            if e.u as usize >= n || e.v as usize >= n {
                return Err(GraphError::Invalid(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(GraphError::Invalid(format!("self-loop at node {}", e.u)));
            }
            degree[e.u as usize] += 1;
            degree[e.v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for deg in &degree {
            offsets.push(offsets.last().unwrap() + deg);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adj = vec![0u32; offsets[n]];
        let mut ports = vec![0u16; offsets[n]];
        for e in &edges {
            let (u, v) = (e.u as usize, e.v as usize);
            adj[fill[u]] = e.v;
            ports[fill[u]] = e.cycle;
            fill[u] += 1;
            adj[fill[v]] = e.u;
            ports[fill[v]] = e.cycle;
            fill[v] += 1;
        }
        let ids = assign_node_ids(n, seed);
        Ok(Self {
            n,
            d,
            seed,
            edges,
            offsets,
            adj,
            ports,
            ids,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> &[HEdge] {
        &self.edges
    }

    /// Incident edge endpoints of `v`, with multiplicity.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Cycle labels aligned with [`HMultigraph::neighbors`].
    pub fn ports(&self, v: usize) -> &[u16] {
        &self.ports[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn id(&self, v: usize) -> NodeId {
        self.ids[v]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Number of `(u, v)` node pairs joined by more than one edge, counting
    /// each extra copy once.
    pub fn parallel_edge_pairs(&self) -> usize {
        let mut seen = std::collections::HashMap::with_capacity(self.edges.len());
        let mut extra = 0;
        for e in &self.edges {
            let key = (e.u.min(e.v), e.u.max(e.v));
            let c = seen.entry(key).or_insert(0usize);
            if *c > 0 {
                extra += 1;
            }
            *c += 1;
        }
        extra
    }

    /// Check `d`-regularity and that each cycle label induces one Hamiltonian cycle.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.edges.len() != self.n * self.d / 2 {
            return Err(GraphError::Invalid(format!(
                "expected {} edges, found {}",
                self.n * self.d / 2,
                self.edges.len()
            )));
        }
        for v in 0..self.n {
            if self.degree(v) != self.d {
                return Err(GraphError::Invalid(format!(
                    "node {v} has degree {} instead of {}",
                    self.degree(v),
                    self.d
                )));
            }
        }
        let cycles = self.d / 2;
        let mut per_label: Vec<Vec<&HEdge>> = vec![Vec::new(); cycles];
        for e in &self.edges {
            if e.cycle == 0 || e.cycle as usize > cycles {
                return Err(GraphError::Invalid(format!("cycle label {} out of range", e.cycle)));
            }
            per_label[e.cycle as usize - 1].push(e);
        }
        for (label, es) in per_label.iter().enumerate() {
            if es.len() != self.n {
                return Err(GraphError::Invalid(format!(
                    "cycle {} has {} edges, expected {}",
                    label + 1,
                    es.len(),
                    self.n
                )));
            }
            let mut inc: Vec<[u32; 2]> = vec![[u32::MAX; 2]; self.n];
            let mut cnt = vec![0u8; self.n];
            for e in es {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    let a = a as usize;
                    if cnt[a] >= 2 {
                        return Err(GraphError::Invalid(format!(
                            "node {a} appears more than twice in cycle {}",
                            label + 1
                        )));
                    }
                    inc[a][cnt[a] as usize] = b;
                    cnt[a] += 1;
                }
            }
            // Walk the cycle from node 0; it must visit all n nodes before returning.
            let (mut prev, mut cur, mut steps) = (u32::MAX, 0u32, 0usize);
            loop {
                let [a, b] = inc[cur as usize];
                let next = if a != prev { a } else { b };
                prev = cur;
                cur = next;
                steps += 1;
                if cur == 0 || steps > self.n {
                    break;
                }
            }
            if steps != self.n {
                return Err(GraphError::Invalid(format!("cycle {} is not Hamiltonian", label + 1)));
            }
        }
        Ok(())
    }
}

/// Lattice radius `k = ceil(d/3)`.
pub fn lattice_radius(d: usize) -> usize {
    d.div_ceil(3)
}

/// `G = H ∪ L`. Since every `H` edge joins nodes at distance 1 ≤ `k`, the
/// `G`-neighborhood of a node equals its `L`-neighborhood.
#[derive(Debug, Clone)]
pub struct Topology {
    pub h: HMultigraph,
    pub k: usize,
    l_offsets: Vec<usize>,
    l_adj: Vec<u32>,
}

impl Topology {
    /// L-neighbors of `v`, sorted ascending.
    #[inline]
    pub fn l_neighbors(&self, v: usize) -> &[u32] {
        &self.l_adj[self.l_offsets[v]..self.l_offsets[v + 1]]
    }

    /// Whether `(u, v)` is an edge of `G`.
    #[inline]
    pub fn is_g_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.l_neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Whether `(u, v)` is an edge of `H`.
    #[inline]
    pub fn is_h_edge(&self, u: usize, v: usize) -> bool {
        self.h.neighbors(u).contains(&(v as u32))
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }
}

/// Add lattice edges at the standard radius `ceil(d/3)`.
pub fn augment_small_world(h: HMultigraph) -> Topology {
    let k = lattice_radius(h.d());
    augment_small_world_with_radius(h, k)
}

/// Add lattice edges between all pairs at `H`-distance in `[1, k]`.
pub fn augment_small_world_with_radius(h: HMultigraph, k: usize) -> Topology {
    let n = h.n();
    let mut bfs = Bfs::new(n);
    let mut l_offsets = Vec::with_capacity(n + 1);
    l_offsets.push(0);
    let mut l_adj = Vec::new();
    for v in 0..n {
        let start = l_adj.len();
        bfs.run(&h, v, k, |w, dist| {
            if dist > 0 {
                l_adj.push(w as u32);
            }
        });
        l_adj[start..].sort_unstable();
        l_offsets.push(l_adj.len());
    }
    Topology { h, k, l_offsets, l_adj }
}
