use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{honest_answer, Adversary, Snapshot};
use crate::graph::{NodeSet, Topology};
use crate::protocol::{
    check_reports, honest_node_step, AlphaVariant, Answer, ColorSource, Emission, HView, NodeState, PhaseParams,
    RoundContext, SubphaseRule, Token, VerifyTask,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// No setup checks, no provenance checks.
    Basic,
    /// Crash on conflicting setup reports and verify every received color.
    #[default]
    Byzantine,
}

/// Protocol knobs shared by every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSettings {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub alpha_variant: AlphaVariant,
    pub subphase_rule: SubphaseRule,
    pub phase_cap: u32,
}

impl ProtocolSettings {
    pub fn phase(&self, i: u32, d: usize) -> PhaseParams {
        PhaseParams::new(i, self.epsilon, d, self.alpha_variant, self.subphase_rule)
    }
}

/// One message as it crossed a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub global_round: u64,
    pub to: u32,
    pub token: Token,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DeliveryStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Move every send into its recipient's inbox, dropping anything whose
/// claimed sender is not the actual sender or that does not travel over an
/// `H` edge.
pub fn deliver_round(topo: &Topology, sends: &[(u32, u32, Token)], inboxes: &mut [Vec<Token>]) -> DeliveryStats {
    let mut stats = DeliveryStats::default();
    for &(sender, to, tok) in sends {
        stats.sent += 1;
        if tok.from != sender || (to as usize) >= inboxes.len() || !topo.is_h_edge(sender as usize, to as usize) {
            stats.dropped += 1;
            continue;
        }
        inboxes[to as usize].push(tok);
        stats.delivered += 1;
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubStepKind {
    Query,
    Answer,
}

/// One delivery step of a verification window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubStep {
    /// The flooding round whose tokens are being checked.
    pub flooding_round: u32,
    pub index: u32,
    pub depth: u32,
    pub kind: SubStepKind,
}

/// The fixed window after flooding round `t`: depth `m` queries go out at
/// step `2m - 1` and come back at step `2m`, for `m = 1..k-1`.
pub fn verification_subround_scheduler(t: u32, k: usize) -> Vec<SubStep> {
    (1..k as u32)
        .flat_map(|m| {
            [
                SubStep {
                    flooding_round: t,
                    index: 2 * m - 1,
                    depth: m,
                    kind: SubStepKind::Query,
                },
                SubStep {
                    flooding_round: t,
                    index: 2 * m,
                    depth: m,
                    kind: SubStepKind::Answer,
                },
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub setup_rounds: u64,
    pub setup_messages: u64,
    pub rounds: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_dropped: u64,
    pub queries: u64,
    pub answers: u64,
    /// Queries addressed to a non-neighbor.
    pub query_violations: u64,
    pub setup_crashes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseStats {
    pub phase: u32,
    pub alpha_i: u32,
    pub subphases: u32,
    pub rounds: u64,
    pub messages: u64,
    pub queries: u64,
    pub decided: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every honest, uncrashed node decided.
    AllDecided,
    /// The phase cap was reached with undecided honest nodes left.
    PhaseCap,
}

/// A node's view during and after setup: its own list, plus whatever each
/// `G`-neighbor reported to it.
struct EngineView<'a> {
    topo: &'a Topology,
    owner: u32,
    reports: &'a HashMap<(u32, u32), Option<Vec<u32>>>,
}

impl HView for EngineView<'_> {
    fn claimed(&self, x: u32) -> Option<&[u32]> {
        if x == self.owner {
            return Some(self.topo.h.neighbors(x as usize));
        }
        if !self.topo.is_g_edge(self.owner as usize, x as usize) {
            return None;
        }
        match self.reports.get(&(x, self.owner)) {
            Some(r) => r.as_deref(),
            None => Some(self.topo.h.neighbors(x as usize)),
        }
    }
}

/// A synchronous run of the counting protocol on a fixed network.
pub struct Simulation {
    topo: Topology,
    byz: NodeSet,
    settings: ProtocolSettings,
    colors: Box<dyn ColorSource + Send>,
    adversary: Box<dyn Adversary>,
    states: Vec<NodeState>,
    /// Setup reports that differ from the reporter's true list, keyed by
    /// `(reporter, recipient)`. Honest reports are always the truth.
    reports: HashMap<(u32, u32), Option<Vec<u32>>>,
    inbox: Vec<Vec<Token>>,
    next_inbox: Vec<Vec<Token>>,
    emissions: Vec<Option<Emission>>,
    sends: Vec<(u32, u32, Token)>,
    counters: Counters,
    per_phase: Vec<PhaseStats>,
    hasher: Sha256,
    buf: Vec<u8>,
    global_round: u64,
    trace: Option<Vec<Delivery>>,
    setup_done: bool,
    phases_run: u32,
}

impl Simulation {
    pub fn new(
        topo: Topology,
        byz: NodeSet,
        settings: ProtocolSettings,
        colors: Box<dyn ColorSource + Send>,
        adversary: Box<dyn Adversary>,
    ) -> Self {
        let n = topo.n();
        let states = (0..n).map(|v| NodeState::new(v as u32, topo.h.id(v))).collect();
        Self {
            byz,
            settings,
            colors,
            adversary,
            states,
            reports: HashMap::new(),
            inbox: vec![Vec::new(); n],
            next_inbox: vec![Vec::new(); n],
            emissions: vec![None; n],
            sends: Vec::new(),
            counters: Counters::default(),
            per_phase: Vec::new(),
            hasher: Sha256::new(),
            buf: Vec::new(),
            global_round: 0,
            trace: None,
            setup_done: false,
            phases_run: 0,
            topo,
        }
    }

    /// Record every delivered token.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[Delivery]> {
        self.trace.as_deref()
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [NodeState] {
        &mut self.states
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn byzantine(&self) -> &NodeSet {
        &self.byz
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn per_phase(&self) -> &[PhaseStats] {
        &self.per_phase
    }

    pub fn phases_run(&self) -> u32 {
        self.phases_run
    }

    pub fn adversary(&self) -> &dyn Adversary {
        &*self.adversary
    }

    /// Total rounds in one subphase of phase `i`, verification included.
    pub fn rounds_per_subphase(&self, i: u32) -> u64 {
        let window = match self.settings.algorithm {
            Algorithm::Basic => 0,
            Algorithm::Byzantine => 2 * (self.topo.k as u64 - 1),
        };
        i as u64 * (1 + window)
    }

    /// Adjacency exchange over `G`: a request and a reply per ordered pair.
    /// Under the hardened protocol each node then cross-checks what it heard.
    pub fn setup(&mut self) {
        if self.setup_done {
            return;
        }
        self.setup_done = true;
        let n = self.topo.n();
        let ctx = RoundContext {
            global_round: 0,
            phase: 0,
            subphase: 0,
            t: 0,
            setup: true,
            params: self.settings.phase(1, self.topo.h.d()),
        };
        for v in 0..n {
            for &u in self.topo.l_neighbors(v) {
                self.counters.setup_messages += 1;
                if !self.byz.contains(u as usize) {
                    self.counters.setup_messages += 1;
                    continue;
                }
                let snap = Snapshot {
                    topo: &self.topo,
                    byz: &self.byz,
                    states: &self.states,
                    colors: &*self.colors,
                    emissions: &self.emissions,
                    ctx,
                };
                let report = self.adversary.topology_report(&snap, u, v as u32);
                if report.is_some() {
                    self.counters.setup_messages += 1;
                }
                if report.as_deref() != Some(self.topo.h.neighbors(u as usize)) {
                    self.reports.insert((u, v as u32), report);
                }
            }
        }
        self.counters.setup_rounds = 2;
        self.global_round = 2;
        if self.settings.algorithm == Algorithm::Byzantine {
            let d = self.topo.h.d();
            let k = self.topo.k;
            // Truthful reports describe one real graph and cannot conflict,
            // so only nodes that were lied to need the full check.
            let mut lied_to: Vec<u32> = self.reports.keys().map(|&(_, r)| r).collect();
            lied_to.sort_unstable();
            lied_to.dedup();
            for v in lied_to.into_iter().map(|v| v as usize) {
                let view = EngineView {
                    topo: &self.topo,
                    owner: v as u32,
                    reports: &self.reports,
                };
                let reporters = self
                    .topo
                    .l_neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&u| view.claimed(u).is_some());
                let topo = &self.topo;
                if check_reports(v as u32, &view, reporters, |x| topo.is_g_edge(v, x as usize), d, k).is_err() {
                    self.states[v].crash();
                    self.counters.setup_crashes += 1;
                    self.buf.extend_from_slice(&(v as u32).to_le_bytes());
                }
            }
            self.flush_hash();
        }
    }

    /// Run phases until every honest, uncrashed node decided or the cap.
    pub fn run(&mut self) -> Termination {
        self.setup();
        for i in 1..=self.settings.phase_cap {
            self.run_phase(i);
            if !self.pending() {
                return Termination::AllDecided;
            }
        }
        Termination::PhaseCap
    }

    fn pending(&self) -> bool {
        self.states
            .iter()
            .enumerate()
            .any(|(v, s)| !self.byz.contains(v) && !s.crashed && s.decided.is_none())
    }

    pub fn run_phase(&mut self, i: u32) -> &PhaseStats {
        self.setup();
        let params = self.settings.phase(i, self.topo.h.d());
        let before = (self.counters.messages_sent, self.counters.queries);
        for j in 1..=params.subphases {
            for t in 1..=i + 1 {
                let ctx = RoundContext {
                    global_round: self.global_round,
                    phase: i,
                    subphase: j,
                    t,
                    setup: false,
                    params,
                };
                self.step(&ctx);
            }
        }
        let rounds = params.subphases as u64 * self.rounds_per_subphase(i);
        self.counters.rounds += rounds;
        self.phases_run = i;
        let decided = self.states.iter().filter(|s| s.decided == Some(i)).count();
        self.per_phase.push(PhaseStats {
            phase: i,
            alpha_i: params.alpha_i,
            subphases: params.subphases,
            rounds,
            messages: self.counters.messages_sent - before.0,
            queries: self.counters.queries - before.1,
            decided,
        });
        self.per_phase.last().unwrap()
    }

    fn step(&mut self, ctx: &RoundContext) {
        let n = self.topo.n();
        if self.settings.algorithm == Algorithm::Byzantine && ctx.t >= 2 {
            self.verify_inboxes(ctx);
            self.global_round += 2 * (self.topo.k as u64 - 1);
        }
        for v in 0..n {
            self.emissions[v] = honest_node_step(&mut self.states[v], &self.inbox[v], ctx, &*self.colors);
        }
        for b in self.inbox.iter_mut() {
            b.clear();
        }
        if ctx.is_tally() {
            return;
        }
        self.sends.clear();
        for v in 0..n {
            if self.byz.contains(v) {
                let snap = Snapshot {
                    topo: &self.topo,
                    byz: &self.byz,
                    states: &self.states,
                    colors: &*self.colors,
                    emissions: &self.emissions,
                    ctx: *ctx,
                };
                let out = self.adversary.act(&snap, v as u32, self.emissions[v]);
                self.sends.extend(out.into_iter().map(|(to, tok)| (v as u32, to, tok)));
            } else if let Some(e) = self.emissions[v] {
                let tok = e.token(v as u32, ctx);
                for &w in self.topo.h.neighbors(v) {
                    if Some(w) != e.predecessor {
                        self.sends.push((v as u32, w, tok));
                    }
                }
            }
        }
        let stats = deliver_round(&self.topo, &self.sends, &mut self.next_inbox);
        self.counters.messages_sent += stats.sent;
        self.counters.messages_delivered += stats.delivered;
        self.counters.messages_dropped += stats.dropped;
        for (to, inbox) in self.next_inbox.iter().enumerate() {
            for tok in inbox {
                self.buf.extend_from_slice(&tok.phase.to_le_bytes());
                self.buf.extend_from_slice(&tok.subphase.to_le_bytes());
                self.buf.extend_from_slice(&(to as u32).to_le_bytes());
                self.buf.extend_from_slice(&tok.from.to_le_bytes());
                self.buf.extend_from_slice(&tok.color.to_le_bytes());
                self.buf.extend_from_slice(&tok.hop.to_le_bytes());
                self.buf
                    .extend_from_slice(&tok.predecessor.unwrap_or(u32::MAX).to_le_bytes());
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(Delivery {
                        global_round: self.global_round,
                        to: to as u32,
                        token: *tok,
                    });
                }
            }
        }
        self.flush_hash();
        std::mem::swap(&mut self.inbox, &mut self.next_inbox);
        self.global_round += 1;
    }

    /// Run the verification window for the tokens now sitting in the
    /// inboxes and keep only those whose provenance checks out.
    fn verify_inboxes(&mut self, ctx: &RoundContext) {
        let n = self.topo.n();
        let k = self.topo.k;
        let mut tasks: Vec<(u32, VerifyTask)> = Vec::new();
        for v in 0..n {
            if self.states[v].crashed {
                self.inbox[v].clear();
                continue;
            }
            let inbox = &mut self.inbox[v];
            inbox.sort_unstable_by_key(|t| (std::cmp::Reverse(t.color), t.from, t.predecessor, t.hop));
            inbox.dedup();
            let view = EngineView {
                topo: &self.topo,
                owner: v as u32,
                reports: &self.reports,
            };
            for tok in inbox.drain(..) {
                tasks.push((v as u32, VerifyTask::new(v as u32, tok, k, &view)));
            }
        }
        let mut answers: Vec<Option<Answer>> = vec![None; tasks.len()];
        for sub in verification_subround_scheduler(ctx.t - 1, k) {
            match sub.kind {
                SubStepKind::Query => {
                    for (slot, (owner, task)) in answers.iter_mut().zip(&tasks) {
                        *slot = None;
                        let Some(q) = task.pending_query() else { continue };
                        let target = q.target as usize;
                        if q.target == *owner {
                            *slot = honest_answer(&self.states[target], &q);
                            continue;
                        }
                        if !self.topo.is_g_edge(*owner as usize, target) {
                            self.counters.query_violations += 1;
                            continue;
                        }
                        self.counters.queries += 1;
                        *slot = if self.states[target].crashed && !self.byz.contains(target) {
                            None
                        } else if self.byz.contains(target) {
                            let snap = Snapshot {
                                topo: &self.topo,
                                byz: &self.byz,
                                states: &self.states,
                                colors: &*self.colors,
                                emissions: &self.emissions,
                                ctx: *ctx,
                            };
                            self.adversary.answer_query(&snap, q.target, &q)
                        } else {
                            honest_answer(&self.states[target], &q)
                        };
                        if slot.is_some() {
                            self.counters.answers += 1;
                        }
                    }
                }
                SubStepKind::Answer => {
                    for (slot, (owner, task)) in answers.iter().zip(tasks.iter_mut()) {
                        if task.pending_query().is_none() {
                            continue;
                        }
                        let view = EngineView {
                            topo: &self.topo,
                            owner: *owner,
                            reports: &self.reports,
                        };
                        task.on_answer(*slot, &view);
                    }
                }
            }
        }
        for (owner, task) in tasks {
            if task.outcome() == Some(true) {
                self.inbox[owner as usize].push(*task.token());
            }
        }
    }

    fn flush_hash(&mut self) {
        if !self.buf.is_empty() {
            self.hasher.update(&self.buf);
            self.buf.clear();
        }
    }

    /// Hash of every delivered token, setup crash and final outcome.
    pub fn transcript_hash(&self) -> String {
        let mut h = self.hasher.clone();
        for s in &self.states {
            h.update(s.decided.unwrap_or(0).to_le_bytes());
            h.update([s.crashed as u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
