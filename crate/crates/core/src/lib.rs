//! Byzantine-resilient counting on sparse small-world expanders.

pub mod adversary;
pub mod baseline;
pub mod engine;
pub mod graph;
pub mod protocol;
pub mod rng;
