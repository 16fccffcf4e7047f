use serde::Serialize;

use super::{Color, ColorSource, PhaseParams, Token};
use crate::graph::NodeId;

/// Where the whole network is in the schedule. Every node sees the same value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundContext {
    pub global_round: u64,
    pub phase: u32,
    pub subphase: u32,
    /// Step within the subphase. Steps `1..=i` send; step `i + 1` only
    /// tallies what arrived in round `i` and is not a separate round.
    pub t: u32,
    pub setup: bool,
    pub params: PhaseParams,
}

impl RoundContext {
    pub fn is_tally(&self) -> bool {
        self.t == self.params.rounds_per_subphase + 1
    }

    pub fn is_last_subphase(&self) -> bool {
        self.subphase == self.params.subphases
    }
}

/// A node's send for one round: the same token to every `H`-neighbor except
/// `predecessor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Emission {
    pub color: Color,
    pub predecessor: Option<u32>,
}

impl Emission {
    pub fn token(&self, from: u32, ctx: &RoundContext) -> Token {
        Token {
            color: self.color,
            phase: ctx.phase as u16,
            subphase: ctx.subphase as u16,
            hop: ctx.t as u16,
            from,
            predecessor: self.predecessor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeState {
    pub index: u32,
    pub id: NodeId,
    pub phase: u32,
    pub subphase: u32,
    pub round: u32,
    /// `k_values[t - 1] = k_t` for the current subphase; 0 if nothing arrived.
    pub k_values: Vec<Color>,
    pub flag_terminate: bool,
    pub decided: Option<u32>,
    pub active: bool,
    pub crashed: bool,
    pub own_color: Color,
    running_max: Color,
    forwarded_max: Color,
    /// `sent[t - 1]`: what this node sent in round `t` of the current subphase.
    pub sent: Vec<Option<Emission>>,
    /// Largest color ever accepted from a neighbor.
    pub max_accepted_color: Color,
    pub malformed: u64,
}

impl NodeState {
    pub fn new(index: u32, id: NodeId) -> Self {
        Self {
            index,
            id,
            phase: 0,
            subphase: 0,
            round: 0,
            k_values: Vec::new(),
            flag_terminate: true,
            decided: None,
            active: true,
            crashed: false,
            own_color: 0,
            running_max: 0,
            forwarded_max: 0,
            sent: Vec::new(),
            max_accepted_color: 0,
            malformed: 0,
        }
    }

    pub fn crash(&mut self) {
        self.crashed = true;
        self.active = false;
    }

    /// Did this node send `color` in round `round` of the current subphase?
    /// Returns the predecessor it recorded, as an answer to a provenance query.
    pub fn sent_in_round(&self, color: Color, round: u16) -> Option<Option<u32>> {
        let e = self.sent.get((round as usize).checked_sub(1)?)?.as_ref()?;
        (e.color == color).then_some(e.predecessor)
    }

    fn well_formed(&self, tok: &Token, ctx: &RoundContext) -> bool {
        tok.color >= 1
            && tok.phase as u32 == ctx.phase
            && tok.subphase as u32 == ctx.subphase
            && tok.hop as u32 + 1 == ctx.t
            && tok.predecessor != Some(tok.from)
    }
}

/// One step of the counting state machine.
///
/// `inbox` holds the tokens sent to this node in round `ctx.t - 1` (already
/// filtered by provenance checks in the hardened protocol).
pub fn honest_node_step(
    state: &mut NodeState,
    inbox: &[Token],
    ctx: &RoundContext,
    colors: &dyn ColorSource,
) -> Option<Emission> {
    if state.crashed {
        return None;
    }
    state.phase = ctx.phase;
    state.subphase = ctx.subphase;
    state.round = ctx.t;
    let i = ctx.params.rounds_per_subphase;

    if ctx.t == 1 {
        if ctx.subphase == 1 {
            state.flag_terminate = true;
        }
        state.k_values.clear();
        state.sent.clear();
        state.sent.resize(i as usize, None);
        state.malformed += inbox.len() as u64;
        state.running_max = 0;
        state.forwarded_max = 0;
        state.own_color = 0;
        if !state.active {
            return None;
        }
        let c = colors.color(state.index as usize, ctx.phase, ctx.subphase);
        state.own_color = c;
        state.running_max = c;
        state.forwarded_max = c;
        let e = Emission {
            color: c,
            predecessor: None,
        };
        state.sent[0] = Some(e);
        return Some(e);
    }

    let mut best: Option<&Token> = None;
    for tok in inbox {
        if !state.well_formed(tok, ctx) {
            state.malformed += 1;
            continue;
        }
        best = match best {
            Some(b) if (b.color, std::cmp::Reverse(b.from)) >= (tok.color, std::cmp::Reverse(tok.from)) => Some(b),
            _ => Some(tok),
        };
    }
    let heard = best.map_or(0, |b| b.color);
    state.max_accepted_color = state.max_accepted_color.max(heard);
    let k = if ctx.t == 2 { heard.max(state.own_color) } else { heard };
    state.k_values.push(k);

    if ctx.t <= i {
        let mut pred = None;
        if let Some(b) = best {
            if b.color > state.running_max {
                state.running_max = b.color;
                pred = Some(b.from);
            }
        }
        if state.running_max > state.forwarded_max {
            state.forwarded_max = state.running_max;
            let e = Emission {
                color: state.running_max,
                predecessor: pred,
            };
            state.sent[ctx.t as usize - 1] = Some(e);
            return Some(e);
        }
        return None;
    }

    // Tally: k_i against every earlier k_t and the threshold.
    let (last, earlier) = state.k_values.split_last().expect("tally after at least one round");
    if earlier.iter().all(|&kt| *last > kt) && *last as f64 > ctx.params.threshold {
        state.flag_terminate = false;
    }
    if ctx.is_last_subphase() && state.flag_terminate && state.decided.is_none() {
        state.decided = Some(ctx.phase);
        state.active = false;
    }
    None
}

/// A Byzantine node's step: the honest machine runs first, then `policy`
/// sees its would-be emission and returns the tokens actually sent, as
/// `(recipient, token)` pairs.
pub fn byzantine_node_step(
    state: &mut NodeState,
    inbox: &[Token],
    ctx: &RoundContext,
    colors: &dyn ColorSource,
    policy: &mut dyn FnMut(&NodeState, &[Token], &RoundContext, Option<Emission>) -> Vec<(u32, Token)>,
) -> Vec<(u32, Token)> {
    let mimic = honest_node_step(state, inbox, ctx, colors);
    policy(state, inbox, ctx, mimic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{AlphaVariant, ScriptedColors, SubphaseRule};

    fn ctx(phase: u32, subphase: u32, t: u32, subphases: u32) -> RoundContext {
        let mut params = PhaseParams::new(phase, 0.1, 8, AlphaVariant::CaseSplit, SubphaseRule::Alpha);
        params.subphases = subphases;
        RoundContext {
            global_round: 0,
            phase,
            subphase,
            t,
            setup: false,
            params,
        }
    }

    fn tok(color: Color, from: u32, c: &RoundContext) -> Token {
        Token {
            color,
            phase: c.phase as u16,
            subphase: c.subphase as u16,
            hop: c.t as u16 - 1,
            from,
            predecessor: None,
        }
    }

    #[test]
    fn records_highest_color_of_the_round() {
        let mut s = NodeState::new(0, NodeId(0));
        let colors = ScriptedColors::default();
        let c1 = ctx(3, 1, 1, 1);
        assert_eq!(honest_node_step(&mut s, &[], &c1, &colors).unwrap().color, 1);
        let c2 = ctx(3, 1, 2, 1);
        let inbox = [tok(3, 1, &c2), tok(5, 2, &c2), tok(2, 3, &c2)];
        let e = honest_node_step(&mut s, &inbox, &c2, &colors).unwrap();
        assert_eq!(s.k_values, vec![5]);
        assert_eq!(
            e,
            Emission {
                color: 5,
                predecessor: Some(2)
            }
        );
        assert_eq!(s.sent_in_round(5, 2), Some(Some(2)));
        assert_eq!(s.sent_in_round(1, 1), Some(None));
        assert_eq!(s.sent_in_round(4, 2), None);
    }

    #[test]
    fn last_round_maximum_clears_the_flag() {
        // Phase 3: threshold(3, 8) = 8.61 - log2(8.61) = 5.50.
        let mut s = NodeState::new(0, NodeId(0));
        let mut colors = ScriptedColors::default();
        colors.set(0, 3, 1, 2);
        let steps: [&[Color]; 4] = [&[], &[1, 2], &[3], &[9]];
        for (t, cs) in steps.iter().enumerate() {
            let c = ctx(3, 1, t as u32 + 1, 1);
            let inbox: Vec<Token> = cs.iter().map(|&x| tok(x, 1, &c)).collect();
            honest_node_step(&mut s, &inbox, &c, &colors);
        }
        assert_eq!(s.k_values, vec![2, 3, 9]);
        assert!(!s.flag_terminate);
        assert_eq!(s.decided, None);
    }

    #[test]
    fn decides_when_no_subphase_clears_the_flag() {
        let mut s = NodeState::new(0, NodeId(0));
        let colors = ScriptedColors::default();
        for j in 1..=2 {
            for t in 1..=4 {
                let c = ctx(3, j, t, 2);
                // An early high color then silence: k_3 never beats k_1.
                let inbox: Vec<Token> = if t == 2 { vec![tok(12, 4, &c)] } else { vec![] };
                honest_node_step(&mut s, &inbox, &c, &colors);
            }
        }
        assert!(s.flag_terminate);
        assert_eq!(s.decided, Some(3));
        assert!(!s.active);
        // Decided nodes stop drawing but keep forwarding.
        let c = ctx(4, 1, 1, 1);
        assert_eq!(honest_node_step(&mut s, &[], &c, &colors), None);
        let c = ctx(4, 1, 2, 1);
        let e = honest_node_step(&mut s, &[tok(6, 4, &c)], &c, &colors);
        assert_eq!(
            e,
            Some(Emission {
                color: 6,
                predecessor: Some(4)
            })
        );
        assert_eq!(s.decided, Some(3));
    }

    #[test]
    fn forwards_only_new_maxima() {
        let mut s = NodeState::new(0, NodeId(0));
        let mut colors = ScriptedColors::default();
        colors.set(0, 4, 1, 4);
        let c = ctx(4, 1, 1, 1);
        honest_node_step(&mut s, &[], &c, &colors);
        let c = ctx(4, 1, 2, 1);
        assert_eq!(honest_node_step(&mut s, &[tok(3, 1, &c)], &c, &colors), None);
        let c = ctx(4, 1, 3, 1);
        assert!(honest_node_step(&mut s, &[tok(7, 1, &c)], &c, &colors).is_some());
        let c = ctx(4, 1, 4, 1);
        assert_eq!(honest_node_step(&mut s, &[tok(7, 2, &c)], &c, &colors), None);
        assert_eq!(s.k_values, vec![4, 7, 7]);
    }

    #[test]
    fn malformed_tokens_are_dropped_and_counted() {
        let mut s = NodeState::new(0, NodeId(0));
        let colors = ScriptedColors::default();
        honest_node_step(&mut s, &[], &ctx(2, 1, 1, 1), &colors);
        let c = ctx(2, 1, 2, 1);
        let mut stale = tok(9, 1, &c);
        stale.hop = 2;
        let mut zero = tok(0, 1, &c);
        zero.hop = 1;
        let mut wrong_phase = tok(9, 1, &c);
        wrong_phase.phase = 7;
        honest_node_step(&mut s, &[stale, zero, wrong_phase], &c, &colors);
        assert_eq!(s.malformed, 3);
        assert_eq!(s.k_values, vec![1]);
    }

    #[test]
    fn crashed_nodes_are_silent() {
        let mut s = NodeState::new(0, NodeId(0));
        s.crash();
        let colors = ScriptedColors::default();
        assert_eq!(honest_node_step(&mut s, &[], &ctx(1, 1, 1, 1), &colors), None);
        assert!(s.crashed);
    }
}
