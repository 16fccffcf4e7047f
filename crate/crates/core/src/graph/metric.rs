//! Balls, boundaries and the locally-tree-like test. Parallel edges collapse
//! for distance purposes.

use std::collections::VecDeque;

use super::HMultigraph;

/// Reusable breadth-first search with a generation-stamped visited array.
pub struct Bfs {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    generation: u32,
    queue: VecDeque<u32>,
}

impl Bfs {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            dist: vec![0; n],
            generation: 0,
            queue: VecDeque::new(),
        }
    }

    fn next_generation(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
    }

    /// Visit every node within distance `radius` of `source`, in BFS order,
    /// calling `visit(node, distance)` once per node.
    pub fn run(&mut self, g: &HMultigraph, source: usize, radius: usize, mut visit: impl FnMut(usize, usize)) {
        self.next_generation();
        let gen = self.generation;
        self.queue.clear();
        self.stamp[source] = gen;
        self.dist[source] = 0;
        self.queue.push_back(source as u32);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u as usize];
            visit(u as usize, du as usize);
            if du as usize == radius {
                continue;
            }
            for &w in g.neighbors(u as usize) {
                if self.stamp[w as usize] != gen {
                    self.stamp[w as usize] = gen;
                    self.dist[w as usize] = du + 1;
                    self.queue.push_back(w);
                }
            }
        }
    }

    /// Whether `v` was reached by the most recent [`Bfs::run`].
    #[inline]
    pub fn reached(&self, v: usize) -> bool {
        self.stamp[v] == self.generation
    }

    /// Distance of `v` in the most recent run, if reached.
    #[inline]
    pub fn distance(&self, v: usize) -> Option<usize> {
        self.reached(v).then(|| self.dist[v] as usize)
    }
}

/// `B(v, r)`: all nodes at `H`-distance at most `r` from `v`, in BFS order.
pub fn ball(g: &HMultigraph, v: usize, r: usize) -> Vec<usize> {
    let mut out = Vec::new();
    Bfs::new(g.n()).run(g, v, r, |w, _| out.push(w));
    out
}

/// `Bd(v, r)`: all nodes at `H`-distance exactly `r` from `v`.
pub fn boundary(g: &HMultigraph, v: usize, r: usize) -> Vec<usize> {
    let mut out = Vec::new();
    Bfs::new(g.n()).run(g, v, r, |w, dist| {
        if dist == r {
            out.push(w)
        }
    });
    out
}

/// `|B(v, r)|` when the ball is a full `(d-1)`-ary tree: `1 + d·Σ_{j=1..r} (d-1)^{j-1}`.
pub fn tree_ball_size(d: usize, r: usize) -> usize {
    let mut size = 1usize;
    let mut layer = d;
    for _ in 0..r {
        size = size.saturating_add(layer);
        layer = layer.saturating_mul(d.saturating_sub(1));
    }
    size
}

/// Whether the subgraph induced by `B(w, r)` is a `(d-1)`-ary tree: the ball has
/// the full tree size and induces exactly `|B| - 1` edges counted with multiplicity.
pub fn is_locally_tree_like(g: &HMultigraph, w: usize, r: usize) -> bool {
    let mut bfs = Bfs::new(g.n());
    tree_like_with(&mut bfs, g, w, r, &mut Vec::new())
}

fn tree_like_with(bfs: &mut Bfs, g: &HMultigraph, w: usize, r: usize, members: &mut Vec<usize>) -> bool {
    members.clear();
    bfs.run(g, w, r, |u, _| members.push(u));
    if members.len() != tree_ball_size(g.d(), r) {
        return false;
    }
    let mut endpoints = 0usize;
    for &u in members.iter() {
        for &x in g.neighbors(u) {
            if bfs.reached(x as usize) {
                endpoints += 1;
            }
        }
    }
    endpoints == 2 * (members.len() - 1)
}

/// Non-tree-like nodes at radius `r`, as a membership mask.
pub fn census_non_tree_like(g: &HMultigraph, r: usize) -> Vec<bool> {
    let mut bfs = Bfs::new(g.n());
    let mut members = Vec::new();
    (0..g.n())
        .map(|w| !tree_like_with(&mut bfs, g, w, r, &mut members))
        .collect()
}

/// Desk-scale tree-likeness radius `max(1, floor(log2 n / (10 log2 d)))`.
pub fn default_tree_radius(n: usize, d: usize) -> usize {
    let r = (n as f64).log2() / (10.0 * (d as f64).log2());
    (r.floor() as usize).max(1)
}

/// Multi-source `H`-distances from `sources`, truncated at `limit`
/// (entries beyond `limit` are `None`).
pub fn h_distance_from_set(g: &HMultigraph, sources: &[bool], limit: usize) -> Vec<Option<usize>> {
    let n = g.n();
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for (v, &s) in sources.iter().enumerate() {
        if s {
            dist[v] = Some(0);
            queue.push_back(v);
        }
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        if du == limit {
            continue;
        }
        for &w in g.neighbors(u) {
            let w = w as usize;
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Multi-source `G`-distances for `G = H ∪ L` with lattice radius `k`.
///
/// Lattice edges join exactly the pairs at `H`-distance `1..=k`, so
/// `dist_G(u, v) = ceil(dist_H(u, v) / k)`.
pub fn g_distance_from_set(g: &HMultigraph, k: usize, sources: &[bool], limit: usize) -> Vec<Option<usize>> {
    h_distance_from_set(g, sources, limit.saturating_mul(k))
        .into_iter()
        .map(|d| d.map(|h| h.div_ceil(k)))
        .collect()
}
