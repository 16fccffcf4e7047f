//! Byzantine placement and the node categories used by the analysis.

use rand::seq::index::sample;

use super::metric::{census_non_tree_like, default_tree_radius, g_distance_from_set};
use super::{GraphError, HMultigraph, Topology};
use crate::rng::{purpose_rng, Purpose};

/// A subset of `0..n` stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    mask: Vec<bool>,
}

impl NodeSet {
    pub fn empty(n: usize) -> Self {
        Self { mask: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for v in members {
            s.mask[v] = true;
        }
        s
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.mask[v]
    }

    pub fn insert(&mut self, v: usize) {
        self.mask[v] = true;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v)
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn is_superset(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| *a || !*b)
    }
}

/// The nine node categories.
#[derive(Debug, Clone)]
pub struct NodeClassification {
    pub byz: NodeSet,
    pub honest: NodeSet,
    pub ltl: NodeSet,
    pub nlt: NodeSet,
    pub unsafe_: NodeSet,
    pub safe: NodeSet,
    pub bad: NodeSet,
    pub bus: NodeSet,
    pub byz_safe: NodeSet,
    pub a_radius: usize,
    pub tree_radius: usize,
}

impl NodeClassification {
    /// The set identities that must hold for every classification.
    pub fn check_algebra(&self) -> Result<(), String> {
        let checks = [
            (self.honest == self.byz.complement(), "honest = V \\ byz"),
            (self.nlt == self.ltl.complement(), "nlt = V \\ ltl"),
            (self.bad == self.byz.union(&self.nlt), "bad = byz ∪ nlt"),
            (self.safe == self.unsafe_.complement(), "safe = V \\ unsafe"),
            (self.byz_safe == self.bus.complement(), "byz_safe = V \\ bus"),
            (self.bus.is_superset(&self.bad), "bus ⊇ bad"),
            (self.unsafe_.is_superset(&self.nlt), "unsafe ⊇ nlt"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(format!("classification identity violated: {name}")),
            None => Ok(()),
        }
    }

    /// Short label used in per-node output.
    pub fn label(&self, v: usize) -> &'static str {
        if self.byz.contains(v) {
            "byzantine"
        } else if self.byz_safe.contains(v) {
            "byz_safe"
        } else if self.safe.contains(v) {
            "safe"
        } else {
            "unsafe"
        }
    }
}

/// Default classification radius `max(1, ceil(a log2 n))` with
/// `a = δ / (10 k log2(d-1))`.
pub fn default_a_radius(n: usize, d: usize, delta: f64) -> usize {
    let k = super::lattice_radius(d) as f64;
    let a = delta / (10.0 * k * ((d - 1) as f64).log2());
    ((a * (n as f64).log2()).ceil() as usize).max(1)
}

/// Classify nodes. `tree_radius` defaults to [`default_tree_radius`];
/// distances for `unsafe`/`bus` are measured in `G`.
pub fn classify_nodes(t: &Topology, byz: &NodeSet, a_radius: usize, tree_radius: Option<usize>) -> NodeClassification {
    let g = &t.h;
    let n = g.n();
    let tree_radius = tree_radius.unwrap_or_else(|| default_tree_radius(n, g.d()));
    let nlt = NodeSet::from_mask(census_non_tree_like(g, tree_radius));
    let ltl = nlt.complement();
    let honest = byz.complement();
    let bad = byz.union(&nlt);
    let within = |sources: &NodeSet| {
        let dist = g_distance_from_set(g, t.k, sources.mask(), a_radius);
        NodeSet::from_mask(dist.iter().map(|d| matches!(d, Some(x) if *x <= a_radius)).collect())
    };
    let unsafe_ = within(&nlt);
    let bus = within(&bad);
    NodeClassification {
        byz: byz.clone(),
        honest,
        ltl,
        safe: unsafe_.complement(),
        unsafe_,
        byz_safe: bus.complement(),
        bus,
        bad,
        nlt,
        a_radius,
        tree_radius,
    }
}

/// Uniformly random Byzantine set of size `floor(n^{1-δ})`, for `3/d < δ ≤ 1`.
pub fn place_byzantine(n: usize, d: usize, delta: f64, seed: u64) -> Result<NodeSet, GraphError> {
    let lo = 3.0 / d as f64;
    if !(delta > lo && delta <= 1.0) {
        return Err(GraphError::DeltaOutOfRange { delta, lo });
    }
    let count = byzantine_count(n, delta);
    let mut rng = purpose_rng(seed, Purpose::Byzantine);
    Ok(NodeSet::from_members(n, sample(&mut rng, n, count)))
}

/// `floor(n^{1-δ})`, robust to floating-point error at exact powers.
pub fn byzantine_count(n: usize, delta: f64) -> usize {
    let x = (n as f64).powf(1.0 - delta);
    ((x + 1e-9).floor() as usize).min(n)
}

/// Length, in nodes, of the longest simple `H`-path whose nodes are all
/// Byzantine. The search stops at `cap`; a return value of `cap` means
/// "at least `cap`".
pub fn longest_byzantine_chain(g: &HMultigraph, byz: &NodeSet, cap: usize) -> usize {
    let mut best = 0;
    let mut on_path = vec![false; g.n()];
    let mut path = Vec::new();
    for s in byz.iter() {
        best = best.max(extend(g, byz, s, cap, &mut on_path, &mut path));
        if best >= cap {
            return cap;
        }
    }
    best
}

fn extend(g: &HMultigraph, byz: &NodeSet, v: usize, cap: usize, on_path: &mut [bool], path: &mut Vec<usize>) -> usize {
    on_path[v] = true;
    path.push(v);
    let mut best = path.len();
    if best < cap {
        for &w in g.neighbors(v) {
            let w = w as usize;
            if byz.contains(w) && !on_path[w] {
                best = best.max(extend(g, byz, w, cap, on_path, path));
                if best >= cap {
                    break;
                }
            }
        }
    }
    path.pop();
    on_path[v] = false;
    best
}

/// One simple all-Byzantine path starting at `start`, as long as possible up
/// to `cap` nodes. Used by adversaries that fabricate provenance chains.
pub fn byzantine_path_from(g: &HMultigraph, byz: &NodeSet, start: usize, cap: usize) -> Vec<usize> {
    fn go(
        g: &HMultigraph,
        byz: &NodeSet,
        v: usize,
        cap: usize,
        on: &mut [bool],
        path: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        on[v] = true;
        path.push(v);
        if path.len() > best.len() {
            *best = path.clone();
        }
        if path.len() < cap {
            for &w in g.neighbors(v) {
                let w = w as usize;
                if byz.contains(w) && !on[w] {
                    go(g, byz, w, cap, on, path, best);
                    if best.len() >= cap {
                        break;
                    }
                }
            }
        }
        path.pop();
        on[v] = false;
    }
    let mut best = Vec::new();
    if byz.contains(start) {
        go(g, byz, start, cap, &mut vec![false; g.n()], &mut Vec::new(), &mut best);
    }
    best
}
