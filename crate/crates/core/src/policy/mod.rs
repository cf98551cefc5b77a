//! Per-team graph-attention policy: embeddings, opponent attention, teammate
//! propagation, categorical head and value head.

mod distribution;
mod graph;
mod params;

pub use distribution::{sample_action, ActionDistribution};
pub use graph::{
    embed_opponent, embed_self, embed_teammate, forward, fuse, opponent_attention, teammate_propagate,
    AttentionReport, PolicyOutput,
};
pub(crate) use graph::{record_entropy, record_forward, record_log_prob, Blocks};
#[cfg(test)]
pub(crate) use graph::read_output;
pub use params::{GraphConfig, PolicyParams, HEAD_WIDTH};
