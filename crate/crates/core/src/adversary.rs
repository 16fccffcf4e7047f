//! Full-information Byzantine strategies.
//!
//! A strategy sees everything through [`Snapshot`]: the topology, every
//! node's state, what every honest node is about to send this round, and the
//! color source itself (so future coins too). It decides what each Byzantine
//! node sends, what it reports during setup, and how it answers provenance
//! queries. The engine delivers only tokens whose sender is the Byzantine
//! node itself and that travel over a real `H` edge.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::graph::{byzantine_path_from, NodeSet, Topology};
use crate::protocol::{Answer, Color, ColorSource, Emission, NodeState, Query, RoundContext, Token};

/// Read-only view of the whole simulation handed to strategies.
pub struct Snapshot<'a> {
    pub topo: &'a Topology,
    pub byz: &'a NodeSet,
    pub states: &'a [NodeState],
    pub colors: &'a dyn ColorSource,
    /// What each node's honest state machine emits this round.
    pub emissions: &'a [Option<Emission>],
    pub ctx: RoundContext,
}

/// Expand an emission into one token per `H` edge, skipping edges to the
/// predecessor.
pub fn broadcast(topo: &Topology, from: u32, e: Emission, ctx: &RoundContext) -> Vec<(u32, Token)> {
    let tok = e.token(from, ctx);
    topo.h
        .neighbors(from as usize)
        .iter()
        .filter(|&&w| Some(w) != e.predecessor)
        .map(|&w| (w, tok))
        .collect()
}

/// What an honest node answers when asked about its own sends.
pub fn honest_answer(state: &NodeState, q: &Query) -> Option<Answer> {
    if state.crashed {
        return None;
    }
    Some(match state.sent_in_round(q.color, q.round) {
        Some(pred) => Answer::Confirm(pred),
        None => Answer::Deny,
    })
}

pub trait Adversary: Send {
    fn name(&self) -> &'static str;

    /// The color this strategy injects, if any; used to detect acceptance.
    fn injected_color(&self) -> Option<Color> {
        None
    }

    /// Adjacency list `byz` reports to `recipient` during setup; `None` is silence.
    fn topology_report(&mut self, snap: &Snapshot, byz: u32, recipient: u32) -> Option<Vec<u32>> {
        let _ = recipient;
        Some(snap.topo.h.neighbors(byz as usize).to_vec())
    }

    /// Tokens `byz` sends this round. `mimic` is what the honest machine
    /// running on `byz` would emit.
    fn act(&mut self, snap: &Snapshot, byz: u32, mimic: Option<Emission>) -> Vec<(u32, Token)> {
        mimic.map_or_else(Vec::new, |e| broadcast(snap.topo, byz, e, &snap.ctx))
    }

    /// Reply from `byz` to a provenance query; `None` is silence.
    fn answer_query(&mut self, snap: &Snapshot, byz: u32, q: &Query) -> Option<Answer> {
        honest_answer(&snap.states[byz as usize], q)
    }
}

/// Byzantine nodes run the protocol honestly.
#[derive(Debug, Default)]
pub struct HonestMimic;

impl Adversary for HonestMimic {
    fn name(&self) -> &'static str {
        "honest_mimic"
    }
}

/// Default injected magnitude: `ceil(4 log2 n) + 10`, above any honest
/// maximum with overwhelming probability.
pub fn default_magnitude(n: usize) -> Color {
    ((4.0 * (n as f64).log2()).ceil() as u32 + 10).min(Color::MAX as u32) as Color
}

/// Every Byzantine node claims a huge color of its own in round 1 of each
/// subphase and stands by it when asked.
#[derive(Debug)]
pub struct MaxInjector {
    pub magnitude: Color,
}

impl Adversary for MaxInjector {
    fn name(&self) -> &'static str {
        "max_injector"
    }

    fn injected_color(&self) -> Option<Color> {
        Some(self.magnitude)
    }

    fn act(&mut self, snap: &Snapshot, byz: u32, mimic: Option<Emission>) -> Vec<(u32, Token)> {
        if snap.ctx.t == 1 {
            let e = Emission {
                color: self.magnitude,
                predecessor: None,
            };
            return broadcast(snap.topo, byz, e, &snap.ctx);
        }
        mimic.map_or_else(Vec::new, |e| broadcast(snap.topo, byz, e, &snap.ctx))
    }

    fn answer_query(&mut self, snap: &Snapshot, byz: u32, q: &Query) -> Option<Answer> {
        if q.color == self.magnitude && q.round == 1 {
            return Some(Answer::Confirm(None));
        }
        honest_answer(&snap.states[byz as usize], q)
    }
}

/// Injects at round `inject_round` with a fabricated forwarding chain. The
/// chain runs along the longest all-Byzantine `H`-path from the injector;
/// where it runs out of accomplices it names an honest neighbor (or claims
/// self-origin if the round count says so).
#[derive(Debug)]
pub struct LateInjector {
    pub inject_round: u32,
    pub magnitude: Color,
    /// `(node, round) -> predecessor` claims for the current subphase.
    plan: HashMap<(u32, u16), Option<u32>>,
    early: Option<MaxInjector>,
}

impl LateInjector {
    pub fn new(inject_round: u32, magnitude: Color, k: usize) -> Self {
        let early = ((inject_round as usize) < k).then_some(MaxInjector { magnitude });
        Self {
            inject_round,
            magnitude,
            plan: HashMap::new(),
            early,
        }
    }

    fn fabricate(&mut self, snap: &Snapshot, byz: u32) -> Option<u32> {
        let t = self.inject_round as usize;
        let k = snap.topo.k;
        let path = byzantine_path_from(&snap.topo.h, snap.byz, byz as usize, k);
        let claim_for = |m: usize| -> Option<u32> {
            // Predecessor named by path[m], which claims to have sent in round t - m.
            if m + 1 < path.len() {
                return Some(path[m + 1] as u32);
            }
            if t - m == 1 {
                return None;
            }
            let x = path[m];
            let nbrs = snap.topo.h.neighbors(x);
            nbrs.iter()
                .copied()
                .find(|&w| !snap.byz.contains(w as usize) && (m == 0 || w != path[m - 1] as u32))
                .or_else(|| nbrs.first().copied())
        };
        let first = claim_for(0);
        for m in 1..path.len().min(t) {
            let pred = claim_for(m);
            self.plan.entry((path[m] as u32, (t - m) as u16)).or_insert(pred);
        }
        first
    }
}

impl Adversary for LateInjector {
    fn name(&self) -> &'static str {
        "late_injector"
    }

    fn injected_color(&self) -> Option<Color> {
        Some(self.magnitude)
    }

    fn act(&mut self, snap: &Snapshot, byz: u32, mimic: Option<Emission>) -> Vec<(u32, Token)> {
        if let Some(early) = self.early.as_mut() {
            return early.act(snap, byz, mimic);
        }
        if snap.ctx.t == 1 {
            self.plan.clear();
        }
        if snap.ctx.t == self.inject_round {
            let pred = self.fabricate(snap, byz);
            let e = Emission {
                color: self.magnitude,
                predecessor: pred,
            };
            return broadcast(snap.topo, byz, e, &snap.ctx);
        }
        mimic.map_or_else(Vec::new, |e| broadcast(snap.topo, byz, e, &snap.ctx))
    }

    fn answer_query(&mut self, snap: &Snapshot, byz: u32, q: &Query) -> Option<Answer> {
        if let Some(early) = self.early.as_mut() {
            return early.answer_query(snap, byz, q);
        }
        if q.color == self.magnitude {
            if let Some(&pred) = self.plan.get(&(byz, q.round)) {
                return Some(Answer::Confirm(pred));
            }
        }
        honest_answer(&snap.states[byz as usize], q)
    }
}

/// Which honest nodes a topology liar lies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiarTargets {
    /// One honest `G`-neighbor that can also hear the hidden node.
    #[default]
    Single,
    /// Every `G`-neighbor.
    All,
}

/// Setup-time liar: hides one real `H`-neighbor and claims a fake one in
/// its place, preferring a fellow Byzantine node as the fake.
#[derive(Debug)]
pub struct TopologyLiar {
    pub targets: LiarTargets,
    /// `byz -> (hidden, fake, target)`.
    lies: HashMap<u32, (u32, u32, Option<u32>)>,
}

impl TopologyLiar {
    pub fn new(targets: LiarTargets) -> Self {
        Self {
            targets,
            lies: HashMap::new(),
        }
    }

    /// The lie `byz` tells: `(hidden, fake, target)`. `hidden` is an honest
    /// `H`-neighbor if there is one, `fake` a non-adjacent node (Byzantine if
    /// possible) and `target` an honest `G`-neighbor that can also hear
    /// `hidden`, so the lie is detectable there.
    pub fn choose(topo: &Topology, byz_set: &NodeSet, byz: u32) -> (u32, u32, Option<u32>) {
        let b = byz as usize;
        let nbrs = topo.h.neighbors(b);
        let hidden = nbrs
            .iter()
            .copied()
            .find(|&u| !byz_set.contains(u as usize))
            .unwrap_or(nbrs[0]);
        let not_adjacent = |x: usize| x != b && !nbrs.contains(&(x as u32));
        let fake = byz_set
            .iter()
            .find(|&x| not_adjacent(x))
            .or_else(|| (0..topo.n()).find(|&x| not_adjacent(x)))
            .unwrap_or(b) as u32;
        let target = topo
            .l_neighbors(b)
            .iter()
            .copied()
            .find(|&v| !byz_set.contains(v as usize) && v != hidden && topo.is_g_edge(v as usize, hidden as usize));
        (hidden, fake, target)
    }

    fn plan(&mut self, snap: &Snapshot, byz: u32) -> (u32, u32, Option<u32>) {
        *self
            .lies
            .entry(byz)
            .or_insert_with(|| Self::choose(snap.topo, snap.byz, byz))
    }
}

impl Adversary for TopologyLiar {
    fn name(&self) -> &'static str {
        "topology_liar"
    }

    fn topology_report(&mut self, snap: &Snapshot, byz: u32, recipient: u32) -> Option<Vec<u32>> {
        let (hidden, fake, target) = self.plan(snap, byz);
        let mut list = snap.topo.h.neighbors(byz as usize).to_vec();
        let lie = match self.targets {
            LiarTargets::All => true,
            LiarTargets::Single => target == Some(recipient),
        };
        if lie {
            if let Some(slot) = list.iter_mut().find(|x| **x == hidden) {
                *slot = fake;
            }
        }
        Some(list)
    }
}

/// Byzantine nodes never send or answer anything.
#[derive(Debug, Default)]
pub struct Silent;

impl Adversary for Silent {
    fn name(&self) -> &'static str {
        "silent"
    }

    fn topology_report(&mut self, _: &Snapshot, _: u32, _: u32) -> Option<Vec<u32>> {
        None
    }

    fn act(&mut self, _: &Snapshot, _: u32, _: Option<Emission>) -> Vec<(u32, Token)> {
        Vec::new()
    }

    fn answer_query(&mut self, _: &Snapshot, _: u32, _: &Query) -> Option<Answer> {
        None
    }
}

/// Setup behavior from one strategy, flooding behavior from another.
pub struct Composite {
    pub topology: Box<dyn Adversary>,
    pub flooding: Box<dyn Adversary>,
}

impl Adversary for Composite {
    fn name(&self) -> &'static str {
        "composite"
    }

    fn injected_color(&self) -> Option<Color> {
        self.flooding.injected_color()
    }

    fn topology_report(&mut self, snap: &Snapshot, byz: u32, recipient: u32) -> Option<Vec<u32>> {
        self.topology.topology_report(snap, byz, recipient)
    }

    fn act(&mut self, snap: &Snapshot, byz: u32, mimic: Option<Emission>) -> Vec<(u32, Token)> {
        self.flooding.act(snap, byz, mimic)
    }

    fn answer_query(&mut self, snap: &Snapshot, byz: u32, q: &Query) -> Option<Answer> {
        self.flooding.answer_query(snap, byz, q)
    }
}

/// Strategy selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum StrategySpec {
    #[default]
    HonestMimic,
    MaxInjector {
        #[serde(default)]
        magnitude: Option<Color>,
    },
    LateInjector {
        inject_round: u32,
        #[serde(default)]
        magnitude: Option<Color>,
    },
    TopologyLiar {
        #[serde(default)]
        targets: LiarTargets,
    },
    Silent,
    Composite {
        topology: Box<StrategySpec>,
        flooding: Box<StrategySpec>,
    },
}


impl StrategySpec {
    pub fn build(&self, n: usize, k: usize) -> Box<dyn Adversary> {
        match self {
            StrategySpec::HonestMimic => Box::new(HonestMimic),
            StrategySpec::MaxInjector { magnitude } => Box::new(MaxInjector {
                magnitude: magnitude.unwrap_or_else(|| default_magnitude(n)),
            }),
            StrategySpec::LateInjector {
                inject_round,
                magnitude,
            } => Box::new(LateInjector::new(
                *inject_round,
                magnitude.unwrap_or_else(|| default_magnitude(n)),
                k,
            )),
            StrategySpec::TopologyLiar { targets } => Box::new(TopologyLiar::new(*targets)),
            StrategySpec::Silent => Box::new(Silent),
            StrategySpec::Composite { topology, flooding } => Box::new(Composite {
                topology: topology.build(n, k),
                flooding: flooding.build(n, k),
            }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StrategySpec::Composite { topology, flooding } => format!("{}+{}", topology.label(), flooding.label()),
            StrategySpec::HonestMimic => "honest_mimic".into(),
            StrategySpec::MaxInjector { .. } => "max_injector".into(),
            StrategySpec::LateInjector { inject_round, .. } => format!("late_injector@{inject_round}"),
            StrategySpec::TopologyLiar { .. } => "topology_liar".into(),
            StrategySpec::Silent => "silent".into(),
        }
    }
}
