//! Support estimation: every node draws a geometric sample and the network
//! max-floods it over `H`. Without Byzantine nodes the common maximum is
//! close to `log2 n`; a single Byzantine node can set it to anything.

use serde::Serialize;

use crate::engine::NodeOutcome;
use crate::graph::{NodeSet, Topology};
use crate::protocol::{draw_color, Color};
use crate::rng::{purpose_rng, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportEstimate {
    /// `X_u`; for Byzantine nodes with a forced value, that value.
    pub samples: Vec<Color>,
    /// Largest value each node has seen.
    pub final_max: Vec<Color>,
    /// Distinct values each node forwarded.
    pub forwards: Vec<u32>,
    /// Last round in which some node's maximum grew, if flooding settled
    /// within the budget.
    pub rounds_to_converge: Option<u32>,
    pub rounds_run: u32,
    pub messages: u64,
}

impl SupportEstimate {
    /// The largest sample anywhere.
    pub fn global_max(&self) -> Color {
        self.samples.iter().copied().max().unwrap_or(0)
    }

    pub fn converged(&self) -> bool {
        self.final_max.windows(2).all(|w| w[0] == w[1])
    }

    pub fn rows(&self, byz: &NodeSet) -> Vec<NodeOutcome> {
        self.final_max
            .iter()
            .enumerate()
            .map(|(v, &m)| NodeOutcome {
                index: v as u32,
                id: crate::graph::NodeId(v as u64),
                class: if byz.contains(v) { "byzantine" } else { "honest" },
                decided: true,
                estimate: Some(m as u32),
                crashed: false,
                max_accepted_color: m,
            })
            .collect()
    }
}

/// Run `rounds` rounds of max-flooding. A node forwards its maximum to every
/// `H`-neighbor once, in the round after it first sees it. Byzantine nodes
/// start from `byz_value` when given, otherwise they behave honestly.
pub fn run_support_estimation(
    topo: &Topology,
    byz: &NodeSet,
    byz_value: Option<Color>,
    rounds: u32,
    seed: u64,
) -> SupportEstimate {
    let n = topo.n();
    let mut rng = purpose_rng(seed, Purpose::Baseline);
    let samples: Vec<Color> = (0..n)
        .map(|v| {
            let x = draw_color(&mut rng);
            match byz_value {
                Some(b) if byz.contains(v) => b,
                _ => x,
            }
        })
        .collect();
    let mut max = samples.clone();
    let mut forwards = vec![0u32; n];
    let mut frontier: Vec<usize> = (0..n).collect();
    let mut changed = vec![false; n];
    let mut rounds_to_converge = None;
    let mut messages = 0u64;
    let mut r = 0;
    while r < rounds {
        if frontier.is_empty() {
            break;
        }
        r += 1;
        // Reads see the values sent this round, not this round's updates.
        let sent: Vec<(usize, Color)> = frontier.iter().map(|&v| (v, max[v])).collect();
        let mut next = Vec::new();
        for (v, m) in sent {
            forwards[v] += 1;
            for &w in topo.h.neighbors(v) {
                messages += 1;
                let w = w as usize;
                if m > max[w] {
                    max[w] = m;
                    if !changed[w] {
                        changed[w] = true;
                        next.push(w);
                    }
                }
            }
        }
        for &w in &next {
            changed[w] = false;
        }
        if !next.is_empty() {
            rounds_to_converge = Some(r);
        }
        frontier = next;
    }
    if !frontier.is_empty() {
        rounds_to_converge = None;
    } else if rounds_to_converge.is_none() {
        rounds_to_converge = Some(0);
    }
    SupportEstimate {
        samples,
        final_max: max,
        forwards,
        rounds_to_converge,
        rounds_run: r,
        messages,
    }
}

/// Summary emitted next to the per-node CSV.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub protocol: &'static str,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub byzantine: usize,
    pub byz_value: Option<Color>,
    pub global_max: Color,
    pub min_final: Color,
    pub max_final: Color,
    pub converged: bool,
    pub rounds_to_converge: Option<u32>,
    pub messages: u64,
}

impl BaselineSummary {
    pub fn new(topo: &Topology, byz: &NodeSet, byz_value: Option<Color>, seed: u64, est: &SupportEstimate) -> Self {
        Self {
            protocol: "baseline",
            n: topo.n(),
            d: topo.h.d(),
            seed,
            byzantine: byz.len(),
            byz_value,
            global_max: est.global_max(),
            min_final: est.final_max.iter().copied().min().unwrap_or(0),
            max_final: est.final_max.iter().copied().max().unwrap_or(0),
            converged: est.converged(),
            rounds_to_converge: est.rounds_to_converge,
            messages: est.messages,
        }
    }
}
