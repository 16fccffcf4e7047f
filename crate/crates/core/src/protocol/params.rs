use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Color;
use crate::rng::StreamFamily;

/// Number of fair-coin flips up to and including the first heads.
pub fn draw_color<R: RngCore + ?Sized>(rng: &mut R) -> Color {
    let mut flips: u32 = 0;
    loop {
        let x = rng.next_u64();
        if x != 0 {
            return (flips + x.trailing_zeros() + 1).min(Color::MAX as u32) as Color;
        }
        flips += 64;
    }
}

/// Where a node's per-subphase color comes from.
pub trait ColorSource {
    fn color(&self, node: usize, phase: u32, subphase: u32) -> Color;
}

impl ColorSource for StreamFamily {
    fn color(&self, node: usize, phase: u32, subphase: u32) -> Color {
        draw_color(&mut self.stream(node, phase, subphase))
    }
}

/// Fixed colors for hand-traced fixtures. Unscripted draws yield 1.
#[derive(Debug, Clone, Default)]
pub struct ScriptedColors {
    pub colors: HashMap<(usize, u32, u32), Color>,
}

impl ScriptedColors {
    pub fn set(&mut self, node: usize, phase: u32, subphase: u32, color: Color) -> &mut Self {
        self.colors.insert((node, phase, subphase), color);
        self
    }
}

impl ColorSource for ScriptedColors {
    fn color(&self, node: usize, phase: u32, subphase: u32) -> Color {
        self.colors.get(&(node, phase, subphase)).copied().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaVariant {
    /// Two cases, switching once `d(d-1)^{i-2}` exceeds `2/ε`.
    #[default]
    CaseSplit,
    /// One closed form with no case split.
    SingleFormula,
}

/// How many subphases phase `i` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubphaseRule {
    /// `α_i` subphases.
    #[default]
    Alpha,
    /// `i·α_i` subphases.
    IAlpha,
}

/// `α_i` with the case split, with both the denominator and the
/// result clamped to at least 1.
pub fn alpha_subphases(i: u32, epsilon: f64, d: usize) -> u32 {
    alpha_subphases_with(i, epsilon, d, AlphaVariant::CaseSplit)
}

pub fn alpha_subphases_with(i: u32, epsilon: f64, d: usize, variant: AlphaVariant) -> u32 {
    let log_inv_eps = (1.0 / epsilon).log2();
    let log_d = (d as f64).log2();
    let log_d1 = ((d - 1) as f64).log2();
    let i_f = i as f64;
    let raw = match variant {
        AlphaVariant::CaseSplit => {
            // d(d-1)^{i-2} <= 2/ε, compared in log space to avoid overflow.
            if log_d + (i_f - 2.0) * log_d1 <= (2.0 / epsilon).log2() {
                let den = (log_d + (i_f - 2.0) * log_d1 - 1.0).max(1.0);
                ((log_inv_eps + i_f + 1.0) / den).ceil()
            } else {
                (1.0 + (i_f + 1.0) / log_inv_eps).ceil()
            }
        }
        AlphaVariant::SingleFormula => {
            let den = ((i_f - 2.0) * log_d1).max(1.0);
            ((log_inv_eps + i_f + 1.0 - log_d) / den).ceil()
        }
    };
    if raw.is_finite() && raw >= 1.0 {
        raw.min(u32::MAX as f64) as u32
    } else {
        1
    }
}

/// `l - log2 l` with `l = log2 d + (i-1) log2(d-1)`.
pub fn continuation_threshold(i: u32, d: usize) -> f64 {
    let l = (d as f64).log2() + (i as f64 - 1.0) * ((d - 1) as f64).log2();
    l - l.log2()
}

/// Everything a node needs to know about phase `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseParams {
    pub i: u32,
    pub alpha_i: u32,
    pub subphases: u32,
    pub threshold: f64,
    pub rounds_per_subphase: u32,
}

impl PhaseParams {
    pub fn new(i: u32, epsilon: f64, d: usize, variant: AlphaVariant, rule: SubphaseRule) -> Self {
        let alpha_i = alpha_subphases_with(i, epsilon, d, variant);
        let subphases = match rule {
            SubphaseRule::Alpha => alpha_i,
            SubphaseRule::IAlpha => alpha_i.saturating_mul(i),
        };
        Self {
            i,
            alpha_i,
            subphases,
            threshold: continuation_threshold(i, d),
            rounds_per_subphase: i,
        }
    }
}
