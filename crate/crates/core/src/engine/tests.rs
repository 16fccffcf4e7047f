use super::*;
use crate::adversary::{HonestMimic, LateInjector, LiarTargets, MaxInjector, Silent, TopologyLiar};
use crate::graph::{augment_small_world, HEdge, HMultigraph, Topology};
use crate::protocol::{ScriptedColors, Token};

fn settings(algorithm: Algorithm) -> ProtocolSettings {
    ProtocolSettings {
        algorithm,
        epsilon: 0.1,
        alpha_variant: AlphaVariant::CaseSplit,
        subphase_rule: SubphaseRule::Alpha,
        phase_cap: 100,
    }
}

fn path6() -> Topology {
    let edges = (0..5).map(|u| HEdge { u, v: u + 1, cycle: 1 }).collect();
    augment_small_world(HMultigraph::from_edges(6, 2, 0, edges).unwrap())
}

fn network(n: usize, seed: u64) -> Topology {
    augment_small_world(generate_h_graph(n, 8, seed).unwrap())
}

fn tok(from: u32, color: Color) -> Token {
    Token {
        color,
        phase: 1,
        subphase: 1,
        hop: 1,
        from,
        predecessor: None,
    }
}

#[test]
fn scheduler_window_has_two_steps_per_depth() {
    let s = verification_subround_scheduler(4, 3);
    assert_eq!(s.len(), 4);
    let kinds: Vec<_> = s.iter().map(|x| (x.index, x.depth, x.kind)).collect();
    assert_eq!(
        kinds,
        vec![
            (1, 1, SubStepKind::Query),
            (2, 1, SubStepKind::Answer),
            (3, 2, SubStepKind::Query),
            (4, 2, SubStepKind::Answer),
        ]
    );
    assert!(verification_subround_scheduler(2, 1).is_empty());
    assert_eq!(verification_subround_scheduler(1, 4).len(), 6);
}

#[test]
fn delivery_enforces_channel_integrity() {
    let t = path6();
    let mut inbox = vec![Vec::new(); 6];
    assert_eq!(deliver_round(&t, &[], &mut inbox), DeliveryStats::default());
    assert!(inbox.iter().all(Vec::is_empty));

    let sends = [
        (0, 1, tok(0, 3)),
        // Spoofed sender.
        (2, 3, tok(4, 9)),
        // Not an H edge.
        (0, 2, tok(0, 9)),
        (5, 4, tok(5, 1)),
    ];
    let s = deliver_round(&t, &sends, &mut inbox);
    assert_eq!(
        s,
        DeliveryStats {
            sent: 4,
            delivered: 2,
            dropped: 2
        }
    );
    assert_eq!(inbox[1], vec![tok(0, 3)]);
    assert_eq!(inbox[4], vec![tok(5, 1)]);
    assert!(inbox[2].is_empty() && inbox[3].is_empty());
}

#[test]
fn path_trace_by_hand() {
    // Node 0 draws 5 in every subphase of phase 2, everyone else draws 1.
    let mut colors = ScriptedColors::default();
    let params = settings(Algorithm::Basic).phase(2, 2);
    for j in 1..=params.subphases {
        colors.set(0, 2, j, 5);
    }
    let mut sim = Simulation::new(
        path6(),
        NodeSet::empty(6),
        settings(Algorithm::Basic),
        Box::new(colors),
        Box::new(HonestMimic),
    );
    sim.enable_trace();
    sim.run_phase(2);

    let trace = sim.trace().unwrap();
    // Per subphase: 10 sends in round 1 (one per edge end), then only
    // node 1 has something new and passes 5 on to node 2, not back to 0.
    let per_sub = 10 + 1;
    assert_eq!(trace.len(), per_sub * params.subphases as usize);
    let second: Vec<_> = trace.iter().filter(|d| d.token.hop == 2).collect();
    assert!(second
        .iter()
        .all(|d| d.to == 2 && d.token.from == 1 && d.token.color == 5 && d.token.predecessor == Some(0)));

    // Node 2 saw its round-2 maximum beat round 1 and the threshold, so it
    // goes on; everyone else stops at 2.
    let decided: Vec<_> = sim.states().iter().map(|s| s.decided).collect();
    assert_eq!(decided, vec![Some(2), Some(2), None, Some(2), Some(2), Some(2)]);
    assert_eq!(sim.states()[2].k_values, vec![1, 5]);
    assert_eq!(sim.states()[1].k_values, vec![5, 0]);
    assert_eq!(sim.counters().rounds, 2 * params.subphases as u64);
    let c = sim.counters();
    assert_eq!(c.messages_sent, c.messages_delivered + c.messages_dropped);
}

#[test]
fn metrics_fixtures() {
    let n = 16;
    let mut states: Vec<NodeState> = (0..n).map(|v| NodeState::new(v, NodeId(v as u64))).collect();
    let none = NodeSet::empty(n as usize);
    let m = collect_metrics(&states, &none, None, [0.5, 4.0]);
    assert_eq!(m.success_fraction, 0.0);
    assert_eq!(m.non_deciders, 16);

    for s in states.iter_mut() {
        s.decided = Some(4);
    }
    let m = collect_metrics(&states, &none, Some(&NodeSet::full(16)), [0.5, 4.0]);
    assert_eq!(m.success_fraction, 1.0);
    assert_eq!(m.byz_safe_success_fraction, Some(1.0));

    // Five nodes, one Byzantine; of the four honest ones two decide inside
    // [0.5, 4] * log2 5, one far above and one not at all.
    let mut states: Vec<NodeState> = (0..5).map(|v| NodeState::new(v, NodeId(v as u64))).collect();
    states[0].decided = Some(2);
    states[1].decided = Some(3);
    states[2].decided = Some(40);
    states[4].decided = Some(2);
    let byz = NodeSet::from_members(5, [4]);
    let m = collect_metrics(&states, &byz, None, [0.5, 4.0]);
    assert_eq!(m.success_fraction, 0.5);
    assert_eq!((m.honest, m.deciders, m.non_deciders), (4, 3, 1));
    assert_eq!(m.byz_safe_success_fraction, None);

    states[0].crash();
    let m = collect_metrics(&states, &byz, None, [0.5, 4.0]);
    assert_eq!(m.crashed_honest, 1);
    assert!((m.success_fraction - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn config_validation_names_the_field() {
    let ok = ExperimentConfig::new(64, 8, 1);
    assert!(ok.validate().is_ok());
    let field = |c: ExperimentConfig| match c.validate() {
        Err(EngineError::Config { field, .. }) => field,
        other => panic!("{other:?}"),
    };
    assert_eq!(field(ExperimentConfig::new(64, 6, 1)), "d");
    assert_eq!(field(ExperimentConfig::new(64, 7, 1)), "d");
    assert_eq!(
        field(ExperimentConfig {
            epsilon: 1.0,
            ..ok.clone()
        }),
        "epsilon"
    );
    assert_eq!(
        field(ExperimentConfig {
            delta: Some(0.3),
            ..ok.clone()
        }),
        "delta"
    );
    assert_eq!(
        field(ExperimentConfig {
            trials: 0,
            ..ok.clone()
        }),
        "trials"
    );
    assert_eq!(
        field(ExperimentConfig {
            band: [2.0, 1.0],
            ..ok.clone()
        }),
        "band"
    );
    let small = ExperimentConfig {
        allow_small_degree: true,
        ..ExperimentConfig::new(64, 4, 1)
    };
    assert!(small.validate().is_ok());

    let parsed: ExperimentConfig = serde_json::from_str(r#"{"n": 128, "delta": 0.6}"#).unwrap();
    assert_eq!(parsed.d, 8);
    assert_eq!(parsed.band, [0.2, 4.0]);
    assert_eq!(parsed.resolved_phase_cap(), 70);
    let err = serde_json::from_str::<ExperimentConfig>(r#"{"n": 128, "colour": 1}"#).unwrap_err();
    assert!(err.to_string().contains("colour"));
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = ExperimentConfig::new(256, 8, 42);
    cfg.delta = Some(0.6);
    cfg.strategy = StrategySpec::MaxInjector { magnitude: None };
    let a = run_trial(&cfg, 0).unwrap();
    let b = run_trial(&cfg, 0).unwrap();
    assert_eq!(a, b);
    let c = run_trial(&cfg, 1).unwrap();
    assert_ne!(a.transcript_hash, c.transcript_hash);
}

#[test]
fn honest_run_counts_add_up() {
    let cfg = ExperimentConfig::new(512, 8, 3);
    let r = run_trial(&cfg, 0).unwrap();
    assert_eq!(r.status, Termination::AllDecided);
    assert_eq!(r.metrics.crashed_honest, 0);
    assert_eq!(r.messages_dropped, 0);
    assert_eq!(r.messages_total, r.messages_delivered);
    assert_eq!(r.setup_rounds, 2);
    let k = r.k as u64;
    let expected: u64 = r
        .per_phase
        .iter()
        .map(|p| p.subphases as u64 * p.phase as u64 * (1 + 2 * (k - 1)))
        .sum();
    assert_eq!(r.rounds_total, expected);
    assert_eq!(r.per_phase.iter().map(|p| p.decided).sum::<usize>(), 512);
    assert!(r.queries_total > 0 && r.answers_total == r.queries_total);
    assert_eq!(r.query_violations, 0);
}

#[test]
fn both_algorithms_agree_without_byzantine_nodes() {
    let mut cfg = ExperimentConfig::new(512, 8, 5);
    let hardened = run_trial(&cfg, 0).unwrap();
    cfg.algorithm = Algorithm::Basic;
    let basic = run_trial(&cfg, 0).unwrap();
    assert_eq!(hardened.transcript_hash, basic.transcript_hash);
    assert!(basic.rounds_total < hardened.rounds_total);
}

#[test]
fn mimics_leave_the_transcript_unchanged() {
    let mut cfg = ExperimentConfig::new(512, 8, 8);
    let clean = run_trial(&cfg, 0).unwrap();
    cfg.delta = Some(0.6);
    let mimic = run_trial(&cfg, 0).unwrap();
    assert!(mimic.byzantine > 0);
    assert_eq!(clean.transcript_hash, mimic.transcript_hash);
    assert_eq!(mimic.metrics.crashed_honest, 0);
}

#[test]
fn honest_nodes_decide_within_four_log_n() {
    let n = 1 << 10;
    let cap = (4.0 * 10.0f64).ceil() as u32;
    let mut decided = 0;
    for seed in 0..20 {
        let mut cfg = ExperimentConfig::new(n, 8, seed);
        cfg.algorithm = Algorithm::Basic;
        let r = run_trial(&cfg, 0).unwrap();
        decided += r.estimates().filter(|&e| (1..=cap).contains(&e)).count();
    }
    assert!(decided as f64 >= 0.9 * 20.0 * n as f64, "{decided}");
}

/// A network with a single Byzantine node that lies to one target.
fn liar_fixture(seed: u64) -> (Simulation, u32, u32) {
    let t = network(512, seed);
    let b = (seed as usize * 37) % 512;
    let byz = NodeSet::from_members(512, [b]);
    let (_, _, target) = TopologyLiar::choose(&t, &byz, b as u32);
    let sim = Simulation::new(
        t,
        byz,
        settings(Algorithm::Byzantine),
        Box::new(StreamFamily::new(seed, Purpose::Colors)),
        Box::new(TopologyLiar::new(LiarTargets::Single)),
    );
    (sim, b as u32, target.expect("a detectable target"))
}

#[test]
fn liar_target_crashes_and_nobody_else_does() {
    for seed in 0..5 {
        let (mut sim, _, target) = liar_fixture(seed);
        sim.setup();
        let crashed: Vec<u32> = (0..512u32).filter(|&v| sim.states()[v as usize].crashed).collect();
        assert_eq!(crashed, vec![target], "seed {seed}");
    }
}

#[test]
fn lying_to_everyone_crashes_only_neighbors_of_the_liar() {
    let t = network(512, 9);
    let byz = NodeSet::from_members(512, [7]);
    let mut sim = Simulation::new(
        t.clone(),
        byz,
        settings(Algorithm::Byzantine),
        Box::new(StreamFamily::new(9, Purpose::Colors)),
        Box::new(TopologyLiar::new(LiarTargets::All)),
    );
    sim.setup();
    let crashed: Vec<usize> = (0..512).filter(|&v| sim.states()[v].crashed).collect();
    assert!(!crashed.is_empty());
    assert!(crashed.iter().all(|&v| t.is_g_edge(v, 7)));
    assert_eq!(sim.counters().setup_crashes as usize, crashed.len());
}

#[test]
fn basic_algorithm_ignores_topology_lies() {
    let (mut sim, _, _) = liar_fixture(2);
    let mut s = settings(Algorithm::Basic);
    s.phase_cap = 1;
    sim = Simulation::new(
        sim.topology().clone(),
        sim.byzantine().clone(),
        s,
        Box::new(StreamFamily::new(2, Purpose::Colors)),
        Box::new(TopologyLiar::new(LiarTargets::Single)),
    );
    sim.setup();
    assert!(sim.states().iter().all(|s| !s.crashed));
}

/// Byzantine sets of `size` random nodes with no all-Byzantine `H`-path of
/// `k` nodes.
fn chain_free_byz(t: &Topology, size: usize, seed: u64) -> NodeSet {
    use rand::seq::index::sample;
    let mut rng = crate::rng::purpose_rng(seed, Purpose::Byzantine);
    loop {
        let byz = NodeSet::from_members(t.n(), sample(&mut rng, t.n(), size));
        if crate::graph::longest_byzantine_chain(&t.h, &byz, t.k) < t.k {
            return byz;
        }
    }
}

#[test]
fn late_injection_is_rejected_without_a_byzantine_chain() {
    for seed in 0..4 {
        let t = network(256, seed);
        let k = t.k;
        for inject in [k as u32, k as u32 + 1] {
            let byz = chain_free_byz(&t, 12, seed);
            let adv = LateInjector::new(inject, 60, k);
            let mut sim = Simulation::new(
                t.clone(),
                byz.clone(),
                settings(Algorithm::Byzantine),
                Box::new(StreamFamily::new(seed, Purpose::Colors)),
                Box::new(adv),
            );
            for i in 1..=6 {
                sim.run_phase(i);
            }
            let accepted = (0..256)
                .filter(|&v| !byz.contains(v) && sim.states()[v].max_accepted_color >= 60)
                .count();
            assert_eq!(accepted, 0, "seed {seed} inject {inject}");
        }
    }
}

#[test]
fn planted_chain_gets_a_late_color_through() {
    let t = network(256, 4);
    let k = t.k;
    // An H-path of k Byzantine nodes.
    let a = 0usize;
    let b = t.h.neighbors(a)[0] as usize;
    let c = t.h.neighbors(b).iter().map(|&x| x as usize).find(|&x| x != a).unwrap();
    assert_eq!(k, 3);
    let byz = NodeSet::from_members(256, [a, b, c]);
    let mut sim = Simulation::new(
        t,
        byz.clone(),
        settings(Algorithm::Byzantine),
        Box::new(StreamFamily::new(4, Purpose::Colors)),
        Box::new(LateInjector::new(k as u32, 60, k)),
    );
    sim.run_phase(3);
    let accepted = (0..256)
        .filter(|&v| !byz.contains(v) && sim.states()[v].max_accepted_color >= 60)
        .count();
    assert!(accepted > 0);
}

#[test]
fn unverified_injection_floods_the_network() {
    let n = 1024;
    let t = network(n, 6);
    let byz = place_byzantine(n, 8, 0.6, 6).unwrap();
    let mut sim = Simulation::new(
        t,
        byz.clone(),
        settings(Algorithm::Basic),
        Box::new(StreamFamily::new(6, Purpose::Colors)),
        Box::new(MaxInjector { magnitude: 60 }),
    );
    sim.run();
    let honest = n - byz.len();
    let reached = (0..n)
        .filter(|&v| !byz.contains(v) && sim.states()[v].max_accepted_color >= 60)
        .count();
    assert!(reached as f64 >= 0.99 * honest as f64, "{reached}/{honest}");
}

#[test]
fn early_injection_is_accepted_under_verification() {
    // Injected at round 1 with a claimed self-origin: nothing to disprove.
    let n = 512;
    let t = network(n, 10);
    let byz = place_byzantine(n, 8, 0.6, 10).unwrap();
    let mut sim = Simulation::new(
        t,
        byz.clone(),
        settings(Algorithm::Byzantine),
        Box::new(StreamFamily::new(10, Purpose::Colors)),
        Box::new(MaxInjector { magnitude: 60 }),
    );
    sim.run_phase(1);
    let accepted = (0..n)
        .filter(|&v| !byz.contains(v) && sim.states()[v].max_accepted_color >= 60)
        .count();
    assert!(accepted > 0);
}

#[test]
fn silent_nodes_send_nothing() {
    let n = 512;
    let t = network(n, 12);
    let byz = place_byzantine(n, 8, 0.6, 12).unwrap();
    let mut sim = Simulation::new(
        t,
        byz.clone(),
        settings(Algorithm::Byzantine),
        Box::new(StreamFamily::new(12, Purpose::Colors)),
        Box::new(Silent),
    );
    sim.enable_trace();
    sim.run();
    assert!(sim
        .trace()
        .unwrap()
        .iter()
        .all(|d| !byz.contains(d.token.from as usize)));
    let decided = (0..n)
        .filter(|&v| !byz.contains(v) && sim.states()[v].decided.is_some())
        .count();
    assert!(decided as f64 >= 0.9 * (n - byz.len()) as f64);
}

#[test]
fn phase_cap_is_reported() {
    let mut cfg = ExperimentConfig::new(512, 8, 1);
    cfg.phase_cap = Some(2);
    let r = run_trial(&cfg, 0).unwrap();
    assert_eq!(r.status, Termination::PhaseCap);
    assert_eq!(r.phases_run, 2);
    assert!(r.metrics.non_deciders > 0);
}

#[test]
fn node_csv_has_one_row_per_node() {
    let r = run_trial(&ExperimentConfig::new(64, 8, 2), 0).unwrap();
    let mut out = Vec::new();
    write_node_csv(&mut out, r.per_node.iter().map(|x| (0, x))).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,node_id,class,decided,estimate,crashed"));
    assert_eq!(lines.count(), 64);
    let mut json = Vec::new();
    write_summary_json(&mut json, &r).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["config"]["n"], 64);
    assert!(v["transcript_hash"].as_str().unwrap().len() == 64);
    assert!(v.get("success_fraction").is_some());
}
