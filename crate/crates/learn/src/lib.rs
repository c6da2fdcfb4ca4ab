//! Learning components: RL² meta-training with PPO, the critic-based planning
//! heuristic, information-theoretic task selection and the supervised baseline.

pub mod agent;
pub mod hmrl;
pub mod itts;
pub mod meta;
pub mod ppo;
pub mod rollout;
pub mod supervised;
pub mod toy;

use thiserror::Error;

pub use agent::{AgentParams, NetConfig, ObsLayout};
pub use hmrl::{HMrl, ValueToCost};
pub use meta::{evaluate_greedy, meta_train, with_optimal_costs, EvalSummary, MetaConfig, TaskRef, TrainReport};
pub use ppo::PpoConfig;
pub use rollout::Guidance;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Invalid(String),
    #[error("no candidate task passed selection")]
    EmptySelection,
    #[error(transparent)]
    Env(#[from] metaplan_core::EnvError),
    #[error(transparent)]
    Checkpoint(#[from] metaplan_nn::NnError),
}

/// Mixes three integers into a well-spread 64-bit seed (SplitMix64 finalizer).
pub fn derive_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a ^ b.rotate_left(21) ^ c.rotate_left(42) ^ 0x9E37_79B9_7F4A_7C15;
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// FNV-1a over bytes; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
