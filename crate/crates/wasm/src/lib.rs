//! Browser demo. Each operation takes plain arguments and returns a JSON
//! string; the `#[wasm_bindgen]` wrappers only forward.

use byzcount::adversary::StrategySpec;
use byzcount::baseline::run_support_estimation;
use byzcount::engine::{run_trial, Algorithm, ExperimentConfig};
use byzcount::graph::{augment_small_world, census_non_tree_like, default_tree_radius, generate_h_graph, NodeSet};
use byzcount::protocol::Color;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Keeps a single call responsive in a browser tab.
pub const MAX_N: usize = 1 << 13;

fn check_n(n: usize) -> Result<(), String> {
    if n > MAX_N {
        return Err(format!("n must be at most {MAX_N}"));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string())
}

fn error(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Size, multi-edges and local tree-likeness of one random graph.
pub fn graph_stats_json(n: usize, d: usize, seed: u64) -> String {
    let run = || -> Result<String, String> {
        check_n(n)?;
        let h = generate_h_graph(n, d, seed).map_err(|e| e.to_string())?;
        let r = default_tree_radius(n, d);
        let non_tree = census_non_tree_like(&h, r).iter().filter(|&&b| b).count();
        let parallel = h.parallel_edge_pairs();
        let edges = h.edges().len();
        let t = augment_small_world(h);
        let l_degree = (0..n).map(|v| t.l_neighbors(v).len()).sum::<usize>() as f64 / n as f64;
        Ok(to_json(&json!({
            "n": n,
            "d": d,
            "edges": edges,
            "parallel_edge_pairs": parallel,
            "tree_radius": r,
            "non_tree_like": non_tree,
            "k": t.k,
            "mean_l_degree": l_degree,
        })))
    };
    run().unwrap_or_else(error)
}

/// One counting run. `strategy` is a strategy JSON object such as
/// `{"name":"max_injector"}`; `delta <= 0` means no Byzantine nodes.
pub fn counting_run_json(n: usize, d: usize, seed: u64, delta: f64, strategy: &str, hardened: bool) -> String {
    let run = || -> Result<String, String> {
        check_n(n)?;
        let mut cfg = ExperimentConfig::new(n, d, seed);
        cfg.delta = (delta > 0.0).then_some(delta);
        cfg.strategy = serde_json::from_str::<StrategySpec>(strategy).map_err(|e| format!("strategy: {e}"))?;
        cfg.algorithm = if hardened {
            Algorithm::Byzantine
        } else {
            Algorithm::Basic
        };
        cfg.validate().map_err(|e| e.to_string())?;
        let r = run_trial(&cfg, 0).map_err(|e| e.to_string())?;
        let mut hist = std::collections::BTreeMap::<u32, usize>::new();
        for e in r.estimates() {
            *hist.entry(e).or_default() += 1;
        }
        Ok(to_json(&json!({
            "log2_n": cfg.log2_n(),
            "status": r.status,
            "phases_run": r.phases_run,
            "byzantine": r.byzantine,
            "success_fraction": r.metrics.success_fraction,
            "deciders": r.metrics.deciders,
            "non_deciders": r.metrics.non_deciders,
            "crashed_honest": r.metrics.crashed_honest,
            "rounds_total": r.rounds_total,
            "messages_total": r.messages_total,
            "injected_accepted_by": r.injected_accepted_by,
            "estimates": hist,
        })))
    };
    run().unwrap_or_else(error)
}

/// The same max-flooding estimate with and without Byzantine nodes that
/// all report `byz_value`.
pub fn baseline_fragility_json(n: usize, d: usize, seed: u64, byzantine: usize, byz_value: Color) -> String {
    let run = || -> Result<String, String> {
        check_n(n)?;
        if byzantine > n {
            return Err("more Byzantine nodes than nodes".into());
        }
        let t = augment_small_world(generate_h_graph(n, d, seed).map_err(|e| e.to_string())?);
        let honest = run_support_estimation(&t, &NodeSet::empty(n), None, n as u32, seed);
        let byz = NodeSet::from_members(n, 0..byzantine);
        let attacked = run_support_estimation(&t, &byz, Some(byz_value), n as u32, seed);
        let summary = |e: &byzcount::baseline::SupportEstimate| {
            json!({
                "global_max": e.global_max(),
                "converged": e.converged(),
                "final_max": e.final_max.iter().max(),
                "rounds_to_converge": e.rounds_to_converge,
                "messages": e.messages,
            })
        };
        Ok(to_json(&json!({
            "log2_n": (n as f64).log2(),
            "honest": summary(&honest),
            "attacked": summary(&attacked),
        })))
    };
    run().unwrap_or_else(error)
}

#[wasm_bindgen]
pub fn graph_stats(n: usize, d: usize, seed: u32) -> String {
    graph_stats_json(n, d, seed as u64)
}

#[wasm_bindgen]
pub fn counting_run(n: usize, d: usize, seed: u32, delta: f64, strategy: &str, hardened: bool) -> String {
    counting_run_json(n, d, seed as u64, delta, strategy, hardened)
}

#[wasm_bindgen]
pub fn baseline_fragility(n: usize, d: usize, seed: u32, byzantine: usize, byz_value: Color) -> String {
    baseline_fragility_json(n, d, seed as u64, byzantine, byz_value)
}
