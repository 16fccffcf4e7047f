//! Setup: learn `B_H(v, k)` from the neighbors' own adjacency claims.
//!
//! Each `G`-neighbor reports its `H`-adjacency list. Reports are
//! cross-checked against each other and against the node's own links. Any
//! contradiction means some reporter lies, and the node crashes rather than
//! act on a view it cannot trust.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

/// One neighbor's claim about its own `H`-adjacency (with multiplicity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborReport {
    pub reporter: u32,
    pub claimed_h_adjacency: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Conflict {
    #[error("node {reporter} claims {len} H-neighbors instead of {d}")]
    WrongDegree { reporter: u32, len: usize, d: usize },
    #[error("node {reporter} sent two different adjacency lists")]
    Inconsistent { reporter: u32 },
    #[error("nodes {a} and {b} disagree on their H-edge multiplicity")]
    Asymmetric { a: u32, b: u32 },
    #[error("claimed H-ball contains {node}, which is not a G-neighbor")]
    Unreachable { node: u32 },
}

/// Read access to a node's reconstructed `H`-neighborhood.
pub trait HView {
    /// Claimed `H`-adjacency of `x`, if `x` reported (or is the owner).
    fn claimed(&self, x: u32) -> Option<&[u32]>;
}

/// A reconstructed view: the owner's own list plus every report received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalView {
    pub owner: u32,
    lists: HashMap<u32, Vec<u32>>,
}

impl LocalView {
    /// Nodes whose adjacency is known, owner included.
    pub fn known(&self) -> impl Iterator<Item = u32> + '_ {
        self.lists.keys().copied()
    }

    /// Nodes within claimed `H`-distance `radius` of the owner.
    pub fn ball(&self, radius: usize) -> HashSet<u32> {
        bfs(self, self.owner, radius).into_keys().collect()
    }
}

impl HView for LocalView {
    fn claimed(&self, x: u32) -> Option<&[u32]> {
        self.lists.get(&x).map(Vec::as_slice)
    }
}

fn bfs(view: &impl HView, owner: u32, radius: usize) -> HashMap<u32, usize> {
    let mut dist = HashMap::from([(owner, 0usize)]);
    let mut queue = VecDeque::from([owner]);
    while let Some(x) = queue.pop_front() {
        let dx = dist[&x];
        if dx == radius {
            continue;
        }
        if let Some(list) = view.claimed(x) {
            for &y in list {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(y) {
                    e.insert(dx + 1);
                    queue.push_back(y);
                }
            }
        }
    }
    dist
}

fn multiplicity(list: &[u32], x: u32) -> usize {
    list.iter().filter(|&&y| y == x).count()
}

/// Cross-check the adjacency claims visible to `owner`.
///
/// `view` must answer for the owner (its true list) and for every reporter;
/// `reporters` lists the nodes that actually reported. Missing reports are
/// not a conflict by themselves.
pub fn check_reports(
    owner: u32,
    view: &impl HView,
    reporters: impl IntoIterator<Item = u32>,
    is_g_neighbor: impl Fn(u32) -> bool,
    d: usize,
    k: usize,
) -> Result<(), Conflict> {
    let mut known = vec![owner];
    for r in reporters {
        let list = view.claimed(r).unwrap_or(&[]);
        if list.len() != d {
            return Err(Conflict::WrongDegree {
                reporter: r,
                len: list.len(),
                d,
            });
        }
        known.push(r);
    }
    for &x in &known {
        let list = view.claimed(x).unwrap_or(&[]);
        for (pos, &y) in list.iter().enumerate() {
            if list[..pos].contains(&y) {
                continue;
            }
            if let Some(back) = view.claimed(y) {
                if multiplicity(list, y) != multiplicity(back, x) {
                    return Err(Conflict::Asymmetric { a: x, b: y });
                }
            }
        }
    }
    for (node, _) in bfs(view, owner, k) {
        if node != owner && !is_g_neighbor(node) {
            return Err(Conflict::Unreachable { node });
        }
    }
    Ok(())
}

/// Rebuild `B_H(owner, k)` from reports, or report the contradiction that
/// forces a crash.
pub fn reconstruct_local_topology(
    owner: u32,
    own_h_adjacency: &[u32],
    g_neighbors: &[u32],
    reports: &[NeighborReport],
    d: usize,
    k: usize,
) -> Result<LocalView, Conflict> {
    let mut lists: HashMap<u32, Vec<u32>> = HashMap::from([(owner, own_h_adjacency.to_vec())]);
    let g: HashSet<u32> = g_neighbors.iter().copied().collect();
    let mut reporters = Vec::new();
    for r in reports {
        if !g.contains(&r.reporter) || r.reporter == owner {
            // No channel exists; such a report cannot arrive.
            continue;
        }
        let mut claim = r.claimed_h_adjacency.clone();
        claim.sort_unstable();
        match lists.get(&r.reporter) {
            Some(prev) => {
                let mut prev = prev.clone();
                prev.sort_unstable();
                if prev != claim {
                    return Err(Conflict::Inconsistent { reporter: r.reporter });
                }
            }
            None => {
                lists.insert(r.reporter, r.claimed_h_adjacency.clone());
                reporters.push(r.reporter);
            }
        }
    }
    let view = LocalView { owner, lists };
    check_reports(owner, &view, reporters, |x| g.contains(&x), d, k)?;
    Ok(view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{augment_small_world_with_radius, ball, HEdge, HMultigraph, Topology};

    fn honest_reports(t: &Topology, v: usize) -> Vec<NeighborReport> {
        t.l_neighbors(v)
            .iter()
            .map(|&u| NeighborReport {
                reporter: u,
                claimed_h_adjacency: t.h.neighbors(u as usize).to_vec(),
            })
            .collect()
    }

    fn ring(n: usize, k: usize) -> Topology {
        // Two copies of the same cycle give a 4-regular multigraph whose
        // balls are still paths.
        let mut edges = Vec::new();
        for c in 1..=2u16 {
            for i in 0..n {
                edges.push(HEdge {
                    u: i as u32,
                    v: ((i + 1) % n) as u32,
                    cycle: c,
                });
            }
        }
        augment_small_world_with_radius(HMultigraph::from_edges(n, 4, 0, edges).unwrap(), k)
    }

    #[test]
    fn honest_ring_reconstructs_the_true_ball() {
        let t = ring(20, 2);
        for v in 0..20 {
            let view = reconstruct_local_topology(
                v as u32,
                t.h.neighbors(v),
                t.l_neighbors(v),
                &honest_reports(&t, v),
                4,
                2,
            )
            .unwrap();
            let truth: HashSet<u32> = ball(&t.h, v, 2).into_iter().map(|x| x as u32).collect();
            assert_eq!(view.ball(2), truth);
        }
    }

    #[test]
    fn hiding_a_real_child_conflicts() {
        // Node 2 plays the liar next to honest node 0: it drops its real
        // neighbor 3 and invents 7 in its place.
        let t = ring(20, 2);
        let mut reports = honest_reports(&t, 1);
        let liar = reports.iter_mut().find(|r| r.reporter == 2).unwrap();
        liar.claimed_h_adjacency = vec![1, 1, 7, 7];
        let err = reconstruct_local_topology(1, t.h.neighbors(1), t.l_neighbors(1), &reports, 4, 2).unwrap_err();
        assert!(
            matches!(err, Conflict::Asymmetric { .. } | Conflict::Unreachable { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn duplicate_identical_reports_are_fine() {
        let t = ring(12, 2);
        let mut reports = honest_reports(&t, 0);
        reports.push(reports[0].clone());
        assert!(reconstruct_local_topology(0, t.h.neighbors(0), t.l_neighbors(0), &reports, 4, 2).is_ok());
        let mut bad = reports[0].clone();
        bad.claimed_h_adjacency.reverse();
        bad.claimed_h_adjacency[0] = 5;
        reports.push(bad);
        assert!(reconstruct_local_topology(0, t.h.neighbors(0), t.l_neighbors(0), &reports, 4, 2).is_err());
    }

    #[test]
    fn wrong_degree_conflicts() {
        let t = ring(12, 2);
        let mut reports = honest_reports(&t, 0);
        reports[0].claimed_h_adjacency.pop();
        assert!(matches!(
            reconstruct_local_topology(0, t.h.neighbors(0), t.l_neighbors(0), &reports, 4, 2),
            Err(Conflict::WrongDegree { .. })
        ));
    }

    #[test]
    fn silence_is_not_a_conflict() {
        let t = ring(12, 2);
        let mut reports = honest_reports(&t, 0);
        reports.retain(|r| r.reporter != 1);
        let view = reconstruct_local_topology(0, t.h.neighbors(0), t.l_neighbors(0), &reports, 4, 2).unwrap();
        assert!(view.claimed(1).is_none());
    }
}
