//! Per-node counting state machines.
//!
//! Phase `i` tests the hypothesis `log2 n ≈ i`. Each of its subphases floods
//! fresh geometric colors along `H` for exactly `i` rounds; a node keeps going
//! only if, in some subphase, the largest color it heard in the last round beat
//! every earlier round and a threshold. The hardened variant adds a
//! topology-reconstruction setup step (crash on conflicting reports) and
//! provenance checks on every received color.

mod node;
mod params;
mod topology;
mod verify;

pub use node::{byzantine_node_step, honest_node_step, Emission, NodeState, RoundContext};
pub use params::{
    alpha_subphases, alpha_subphases_with, continuation_threshold, draw_color, AlphaVariant, ColorSource, PhaseParams,
    ScriptedColors, SubphaseRule,
};
pub use topology::{check_reports, reconstruct_local_topology, Conflict, HView, LocalView, NeighborReport};
pub use verify::{verify_color_provenance, Answer, Query, VerifyTask};

use serde::{Deserialize, Serialize};

/// A geometric color. Valid colors are `>= 1`; `0` means "nothing".
pub type Color = u16;

/// A flooded color.
///
/// On the wire this is two identifiers (`from`, `predecessor`, the latter
/// equal to `from` for self-originated tokens) plus four 16-bit fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub color: Color,
    pub phase: u16,
    pub subphase: u16,
    /// Round of the subphase in which the token was sent.
    pub hop: u16,
    pub from: u32,
    /// The node `from` claims to have received the color from; `None` if
    /// `from` originated it.
    pub predecessor: Option<u32>,
}

impl Token {
    pub const WIRE_IDS: usize = 2;
    pub const WIRE_AUX_BITS: usize = 4 * 16;

    /// Bits on the wire given `id_bits`-bit identifiers.
    pub fn wire_bits(id_bits: usize) -> usize {
        Self::WIRE_IDS * id_bits + Self::WIRE_AUX_BITS
    }
}
