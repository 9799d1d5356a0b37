//! The outer learning loop, replay, intrinsic rewards and the ablation ladder.
//!
//! Each [`Agent::hhvg_step`] acts once, then trains in a fixed order: forward
//! model, value function (several fitted-evaluation updates), meta-model
//! (devaluation), policy. Components absent from a variant are skipped.

mod learner;
mod pool;
mod rewards;
mod variant;

pub use learner::{
    devaluation_progress, devaluation_progress_batch, initial_forward_model, reward_provider_for, value_target, Agent,
    AgentConfig, Counters, LearningRates, RewardProvider, StepReport,
};
pub(crate) use learner::{sample_of, seeded_stream};
pub use pool::{ExperiencePool, Transition};
pub use rewards::RewardDatabase;
pub use variant::{Role, Variant, VariantSpec};
