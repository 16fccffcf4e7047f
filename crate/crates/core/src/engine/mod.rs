//! Deterministic synchronous simulation of the counting protocol.
//!
//! [`run_trial`] builds the network from the trial seed, places Byzantine
//! nodes, runs setup and then phases until every honest node decided or the
//! phase cap, and returns the measured outcome. [`Simulation`] is the same
//! loop with the network and color source supplied by the caller.

mod output;
mod sim;

pub use output::{write_node_csv, write_summary_json, NODE_CSV_HEADER};
pub use sim::{
    deliver_round, verification_subround_scheduler, Algorithm, Counters, Delivery, DeliveryStats, PhaseStats,
    ProtocolSettings, Simulation, SubStep, SubStepKind, Termination,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::StrategySpec;
use crate::graph::{
    augment_small_world, byzantine_count, classify_nodes, default_a_radius, generate_h_graph, place_byzantine,
    GraphError, NodeClassification, NodeId, NodeSet,
};
use crate::protocol::{AlphaVariant, Color, NodeState, SubphaseRule};
use crate::rng::{derive_seed, Purpose, StreamFamily};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn bad(field: &'static str, msg: impl Into<String>) -> EngineError {
    EngineError::Config { field, msg: msg.into() }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_trials() -> u32 {
    1
}

fn default_band() -> [f64; 2] {
    [0.2, 4.0]
}

fn default_d() -> usize {
    8
}

/// One experiment: a network size and shape, an adversary and protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Byzantine nodes number `floor(n^{1-delta})`; absent means none.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub strategy: StrategySpec,
    /// Defaults to `ceil(10 log2 n)`.
    #[serde(default)]
    pub phase_cap: Option<u32>,
    #[serde(default)]
    pub subphase_factor: SubphaseRule,
    #[serde(default)]
    pub alpha_variant: AlphaVariant,
    #[serde(default = "default_trials")]
    pub trials: u32,
    /// Success band as multiples of `log2 n`.
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    /// Override for the Byzantine-safety radius.
    #[serde(default)]
    pub a_radius: Option<usize>,
    /// Override for the tree-likeness radius.
    #[serde(default)]
    pub tree_radius: Option<usize>,
    /// Allow degrees below 8, for small fixtures.
    #[serde(default)]
    pub allow_small_degree: bool,
}

impl ExperimentConfig {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            delta: None,
            epsilon: default_epsilon(),
            seed,
            algorithm: Algorithm::default(),
            strategy: StrategySpec::default(),
            phase_cap: None,
            subphase_factor: SubphaseRule::default(),
            alpha_variant: AlphaVariant::default(),
            trials: 1,
            band: default_band(),
            a_radius: None,
            tree_radius: None,
            allow_small_degree: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n < 3 {
            return Err(bad("n", format!("need at least 3 nodes, got {}", self.n)));
        }
        if self.n > u32::MAX as usize / 2 {
            return Err(bad("n", "too large"));
        }
        if !self.d.is_multiple_of(2) || self.d < 2 {
            return Err(bad("d", format!("must be even and at least 2, got {}", self.d)));
        }
        if self.d < 8 && !self.allow_small_degree {
            return Err(bad(
                "d",
                format!("must be at least 8 for protocol runs, got {}", self.d),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(delta) = self.delta {
            let lo = 3.0 / self.d as f64;
            if !(delta > lo && delta <= 1.0) {
                return Err(bad("delta", format!("must lie in ({lo:.4}, 1], got {delta}")));
            }
        }
        if self.phase_cap == Some(0) {
            return Err(bad("phase_cap", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be at least 1"));
        }
        let [lo, hi] = self.band;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(bad("band", format!("need 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        if let StrategySpec::LateInjector { inject_round: 0, .. } = self.strategy {
            return Err(bad("strategy", "inject_round must be at least 1"));
        }
        Ok(())
    }

    pub fn log2_n(&self) -> f64 {
        (self.n as f64).log2()
    }

    pub fn resolved_phase_cap(&self) -> u32 {
        self.phase_cap.unwrap_or_else(|| (10.0 * self.log2_n()).ceil() as u32)
    }

    pub fn settings(&self) -> ProtocolSettings {
        ProtocolSettings {
            algorithm: self.algorithm,
            epsilon: self.epsilon,
            alpha_variant: self.alpha_variant,
            subphase_rule: self.subphase_factor,
            phase_cap: self.resolved_phase_cap(),
        }
    }

    pub fn byzantine_count(&self) -> usize {
        self.delta.map_or(0, |delta| byzantine_count(self.n, delta))
    }

    /// Seed for trial `trial`; every random choice of the trial derives from it.
    pub fn trial_seed(&self, trial: u32) -> u64 {
        derive_seed(self.seed, ((Purpose::Trial as u64) << 32) | trial as u64)
    }
}

/// A node's final state as reported per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeOutcome {
    pub index: u32,
    pub id: NodeId,
    pub class: &'static str,
    pub decided: bool,
    pub estimate: Option<u32>,
    pub crashed: bool,
    pub max_accepted_color: Color,
}

/// Success measures over honest nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Honest, uncrashed nodes with an in-band estimate over all honest,
    /// uncrashed nodes.
    pub success_fraction: f64,
    /// The same, restricted to Byzantine-safe nodes; `None` if there are none.
    pub byz_safe_success_fraction: Option<f64>,
    pub honest: usize,
    pub crashed_honest: usize,
    pub deciders: usize,
    pub non_deciders: usize,
    pub byz_safe: usize,
    pub band: [f64; 2],
}

fn fraction(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Score final states against the band `[lo log2 n, hi log2 n]`.
/// Undecided nodes count in the denominator only.
pub fn collect_metrics(states: &[NodeState], byz: &NodeSet, byz_safe: Option<&NodeSet>, band: [f64; 2]) -> Metrics {
    let log_n = (states.len() as f64).log2();
    let (lo, hi) = (band[0] * log_n, band[1] * log_n);
    let in_band = |s: &NodeState| s.decided.is_some_and(|e| (lo..=hi).contains(&(e as f64)));
    let mut m = Metrics {
        success_fraction: 0.0,
        byz_safe_success_fraction: None,
        honest: 0,
        crashed_honest: 0,
        deciders: 0,
        non_deciders: 0,
        byz_safe: 0,
        band,
    };
    let (mut live, mut good, mut safe_live, mut safe_good) = (0, 0, 0, 0);
    for (v, s) in states.iter().enumerate() {
        if byz.contains(v) {
            continue;
        }
        m.honest += 1;
        if byz_safe.is_some_and(|b| b.contains(v)) {
            m.byz_safe += 1;
        }
        if s.crashed {
            m.crashed_honest += 1;
            continue;
        }
        live += 1;
        if s.decided.is_some() {
            m.deciders += 1;
        } else {
            m.non_deciders += 1;
        }
        let ok = in_band(s);
        good += ok as usize;
        if byz_safe.is_some_and(|b| b.contains(v)) {
            safe_live += 1;
            safe_good += ok as usize;
        }
    }
    m.success_fraction = fraction(good, live).unwrap_or(0.0);
    m.byz_safe_success_fraction = fraction(safe_good, safe_live);
    m
}

/// Everything measured in one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub protocol: &'static str,
    pub config: ExperimentConfig,
    pub trial: u32,
    pub trial_seed: u64,
    pub strategy: String,
    pub status: Termination,
    pub phases_run: u32,
    pub k: usize,
    pub byzantine: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub rounds_total: u64,
    pub setup_rounds: u64,
    pub setup_messages: u64,
    pub messages_total: u64,
    pub messages_delivered: u64,
    pub messages_dropped: u64,
    pub queries_total: u64,
    pub answers_total: u64,
    pub query_violations: u64,
    pub malformed_tokens: u64,
    /// Honest nodes that accepted a color at least as high as the injected one.
    pub injected_accepted_by: usize,
    pub per_phase: Vec<PhaseStats>,
    pub transcript_hash: String,
    #[serde(skip)]
    pub per_node: Vec<NodeOutcome>,
}

impl ExperimentResult {
    pub fn estimates(&self) -> impl Iterator<Item = u32> + '_ {
        self.per_node
            .iter()
            .filter(|r| r.class != "byzantine" && !r.crashed)
            .filter_map(|r| r.estimate)
    }
}

/// Build and run trial `trial` of `cfg`.
pub fn run_trial(cfg: &ExperimentConfig, trial: u32) -> Result<ExperimentResult, EngineError> {
    cfg.validate()?;
    let seed = cfg.trial_seed(trial);
    let h = generate_h_graph(cfg.n, cfg.d, seed)?;
    let topo = augment_small_world(h);
    let k = topo.k;
    let byz = match cfg.delta {
        Some(delta) => place_byzantine(cfg.n, cfg.d, delta, seed)?,
        None => NodeSet::empty(cfg.n),
    };
    let a_radius = cfg
        .a_radius
        .unwrap_or_else(|| default_a_radius(cfg.n, cfg.d, cfg.delta.unwrap_or(1.0)));
    let class = classify_nodes(&topo, &byz, a_radius, cfg.tree_radius);
    let colors = StreamFamily::new(seed, Purpose::Colors);
    let adversary = cfg.strategy.build(cfg.n, k);
    let mut sim = Simulation::new(topo, byz, cfg.settings(), Box::new(colors), adversary);
    let status = sim.run();
    Ok(finish(cfg, trial, seed, status, &sim, &class))
}

/// Run every trial of `cfg` in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, EngineError> {
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

fn finish(
    cfg: &ExperimentConfig,
    trial: u32,
    trial_seed: u64,
    status: Termination,
    sim: &Simulation,
    class: &NodeClassification,
) -> ExperimentResult {
    let states = sim.states();
    let byz = sim.byzantine();
    let metrics = collect_metrics(states, byz, Some(&class.byz_safe), cfg.band);
    let injected = sim.adversary().injected_color();
    let per_node = states
        .iter()
        .enumerate()
        .map(|(v, s)| NodeOutcome {
            index: v as u32,
            id: s.id,
            class: class.label(v),
            decided: s.decided.is_some(),
            estimate: s.decided,
            crashed: s.crashed,
            max_accepted_color: s.max_accepted_color,
        })
        .collect();
    let injected_accepted_by = injected.map_or(0, |c| {
        states
            .iter()
            .enumerate()
            .filter(|&(v, s)| !byz.contains(v) && s.max_accepted_color >= c)
            .count()
    });
    let c = sim.counters();
    ExperimentResult {
        protocol: "counting",
        config: cfg.clone(),
        trial,
        trial_seed,
        strategy: cfg.strategy.label(),
        status,
        phases_run: sim.phases_run(),
        k: sim.topology().k,
        byzantine: byz.len(),
        metrics,
        rounds_total: c.rounds,
        setup_rounds: c.setup_rounds,
        setup_messages: c.setup_messages,
        messages_total: c.messages_sent,
        messages_delivered: c.messages_delivered,
        messages_dropped: c.messages_dropped,
        queries_total: c.queries,
        answers_total: c.answers,
        query_violations: c.query_violations,
        malformed_tokens: states.iter().map(|s| s.malformed).sum(),
        injected_accepted_by,
        per_phase: sim.per_phase().to_vec(),
        transcript_hash: sim.transcript_hash(),
        per_node,
    }
}

#[cfg(test)]
mod tests;
