//! Community rewriting as a two-headed policy. At each step one head may
//! drop a member and the other may absorb a boundary node; either head can
//! instead pick a virtual node, which stops it for the rest of the episode.
//! Node states are refreshed by a GIN pass after every step. Training is
//! REINFORCE on immediate F1 gains.

mod agent;
mod episode;
mod train;

pub use agent::AgentParams;
pub use episode::{
    apply_actions, init_state, reward, rollout, step_policy, Action, Decision, Env, EpisodeState, Limits, Selection,
    StepRecord, StepRewards, Trajectory,
};
pub use train::{
    make_training_samples, policy_update, rewrite, rewrite_all, sample_rollouts, train_rewriter, trajectory_gradient,
    trajectory_loss, EpochStats, RewriterConfig, RewriterLog, TrainingSample,
};
