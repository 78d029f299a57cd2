//! Proximal policy optimization over the hybrid action space.

mod buffer;
mod config;
mod gae;
mod loss;
pub mod policy;
mod trainer;

pub use buffer::{Trajectory, TrajectoryRecord};
pub use config::PpoConfig;
pub use gae::{compute_gae, normalize};
pub use loss::{
    clipped_policy_loss, ppo_loss_and_gradients, total_loss, value_loss, LossBreakdown,
    LossWeights, Minibatch,
};
pub use policy::{sample_action, HybridPolicyOutput, SampledAction};
pub use trainer::{train, train_with_callback, Agent, EpochStats, TrainingReport};
