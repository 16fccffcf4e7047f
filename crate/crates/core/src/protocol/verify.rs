//! Provenance checks for received colors.
//!
//! A token names one predecessor. The receiver walks the claimed chain
//! backwards, one direct query per hop over lattice links, asking each node
//! whether it sent this color in the matching round and from whom it got it.
//! The walk stops after `min(t, k) - 1` hops: beyond that the chain leaves
//! the receiver's lattice neighborhood.

use super::{Color, HView, Token};

/// "Did you send `color` in round `round` of this subphase?"
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Query {
    pub querier: u32,
    pub target: u32,
    pub color: Color,
    pub round: u16,
}

/// `Confirm(None)` claims self-origin; `Deny` covers everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Confirm(Option<u32>),
    Deny,
}

/// One in-flight provenance check, advanced one query at a time so that
/// many checks can share a fixed schedule.
#[derive(Debug, Clone)]
pub struct VerifyTask {
    owner: u32,
    token: Token,
    depth: u16,
    /// `chain[m]` sent the color in round `t - m`.
    chain: Vec<u32>,
    next: Option<u32>,
    outcome: Option<bool>,
}

impl VerifyTask {
    pub fn new(owner: u32, token: Token, k: usize, view: &impl HView) -> Self {
        let t = token.hop;
        let depth = (t.min(k as u16)).saturating_sub(1);
        let mut task = Self {
            owner,
            token,
            depth,
            chain: vec![token.from],
            next: None,
            outcome: None,
        };
        if t == 0 {
            task.outcome = Some(false);
            return task;
        }
        task.advance(token.predecessor, view);
        task
    }

    /// Record that `chain.last()` named `pred` and decide what happens next.
    fn advance(&mut self, pred: Option<u32>, view: &impl HView) {
        let m = self.chain.len() as u16 - 1;
        let round = self.token.hop - m;
        let Some(p) = pred else {
            self.outcome = Some(round == 1);
            return;
        };
        if round == 1 {
            self.outcome = Some(false);
            return;
        }
        let last = *self.chain.last().unwrap();
        let embeds = view.claimed(last).is_some_and(|l| l.contains(&p));
        if !embeds || self.chain.contains(&p) {
            self.outcome = Some(false);
            return;
        }
        if m == self.depth {
            self.outcome = Some(true);
            return;
        }
        self.chain.push(p);
        self.next = Some(p);
    }

    pub fn pending_query(&self) -> Option<Query> {
        if self.outcome.is_some() {
            return None;
        }
        self.next.map(|target| Query {
            querier: self.owner,
            target,
            color: self.token.color,
            round: self.token.hop - (self.chain.len() as u16 - 1),
        })
    }

    /// Feed the answer to [`VerifyTask::pending_query`]; `None` means no
    /// answer arrived, which counts as a denial.
    pub fn on_answer(&mut self, answer: Option<Answer>, view: &impl HView) {
        if self.outcome.is_some() {
            return;
        }
        self.next = None;
        match answer {
            Some(Answer::Confirm(pred)) => self.advance(pred, view),
            _ => self.outcome = Some(false),
        }
    }

    pub fn outcome(&self) -> Option<bool> {
        self.outcome
    }

    pub fn token(&self) -> &Token {
        &self.token
    }

    /// Nodes traversed so far, starting with the sender.
    pub fn chain(&self) -> &[u32] {
        &self.chain
    }
}

/// Run one check to completion against a query oracle.
pub fn verify_color_provenance(
    owner: u32,
    view: &impl HView,
    token: Token,
    k: usize,
    mut query: impl FnMut(Query) -> Option<Answer>,
) -> bool {
    let mut task = VerifyTask::new(owner, token, k, view);
    while let Some(q) = task.pending_query() {
        let a = query(q);
        task.on_answer(a, view);
    }
    task.outcome().unwrap_or(false)
}
