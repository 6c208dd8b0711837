//! Gaussian MLP actor, twin critics, soft actor-critic training with a
//! feasibility penalty, baseline policies and evaluation.

pub mod baselines;
pub mod buffer;
pub mod checkpoint;
pub mod fr;
pub mod nn;
pub mod obs;
pub mod policy;
pub mod rollout;
pub mod sac;
pub mod train;

pub use baselines::{GreedyPolicy, RandomPolicy};
pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::Checkpoint;
pub use fr::{fr_grad, fr_loss};
pub use nn::{Adam, Mlp};
pub use obs::{obs_len, observe};
pub use policy::{policy_mean, policy_sample, Arch, Heads, PolicyParams, Sample};
pub use rollout::{evaluate, mean_ci95, run_episode, ActCtx, EpisodeOutcome, EvalSpec, EvalSummary, InstanceResult, Policy, SacPolicy};
pub use sac::{actor_loss, critic_loss, critic_targets, temperature_loss, SacHyper, SacTrainer, UpdateReport};
pub use train::{train, TrainConfig, TrainEvent, TrainMetrics};
