use rand::Rng as _;

use super::agent::AgentParams;
use super::episode::{rollout, surrogate_on_tape, Env, Limits, Selection, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{capped_ego_net, Community, Graph, DEFAULT_BOUNDARY_CAP};
use crate::ndiff::{adam_step, sum_gradients, DenseArray, OptimState, Tape};
use crate::rng;

/// A training episode: a k-ego seed around a member of `truth`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub seed: Community,
    pub truth: Community,
}

/// Draws `count` samples: a training community uniformly, one of its
/// members uniformly, and that member's capped k-ego net as the seed.
pub fn make_training_samples(
    graph: &Graph,
    train: &[Community],
    radius: usize,
    size_cap: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    if train.is_empty() {
        return Err(Error::NoCommunities("rewriter training set is empty".into()));
    }
    let mut r = rng::rng_for(seed, "rewriter-samples", 0);
    (0..count)
        .map(|_| {
            let truth = &train[r.gen_range(0..train.len())];
            let center = truth.members()[r.gen_range(0..truth.len())];
            Ok(TrainingSample {
                seed: capped_ego_net(graph, center, radius, size_cap)?,
                truth: truth.clone(),
            })
        })
        .collect()
}

/// Policy-gradient loss `-Σ_t log π(a_t) · r_t` of one trajectory,
/// replayed with its recorded actions under the current parameters.
pub fn trajectory_loss(env: &Env, agent: &AgentParams, traj: &Trajectory) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = tape.params(agent.params())?;
    Ok(surrogate_on_tape(env, &mut tape, &vars, traj)?.map_or(0.0, |s| -tape.scalar(s)))
}

/// Gradient of [`trajectory_loss`].
pub fn trajectory_gradient(env: &Env, agent: &AgentParams, traj: &Trajectory) -> Result<Vec<DenseArray>> {
    let mut tape = Tape::new();
    let vars = tape.params(agent.params())?;
    match surrogate_on_tape(env, &mut tape, &vars, traj)? {
        Some(s) => {
            let loss = tape.scale(s, -1.0)?;
            tape.backward(loss, agent.params())
        }
        None => Ok(sum_gradients(agent.params(), std::iter::empty())),
    }
}

/// REINFORCE update: per-trajectory gradients (in parallel under `exec`)
/// summed in trajectory order, then one Adam step.
pub fn policy_update(
    env: &Env,
    agent: &mut AgentParams,
    opt: &mut OptimState,
    trajectories: &[Trajectory],
    exec: &Exec,
) -> Result<()> {
    let frozen = &*agent;
    let grads = exec.try_map(trajectories.len(), |i| trajectory_gradient(env, frozen, &trajectories[i]))?;
    let total = sum_gradients(agent.params(), grads);
    adam_step(agent.params_mut(), &total, opt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewriterConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub boundary_cap: usize,
    /// Ego-net radius of the training seeds.
    pub radius: usize,
    /// Community size cap; `None` uses the largest training community.
    pub size_cap: Option<usize>,
    pub seed: u64,
}

impl Default for RewriterConfig {
    fn default() -> Self {
        RewriterConfig {
            hidden: 32,
            lr: 1e-3,
            epochs: 1200,
            episodes_per_epoch: 20,
            boundary_cap: DEFAULT_BOUNDARY_CAP,
            radius: 2,
            size_cap: None,
            seed: 0,
        }
    }
}

impl RewriterConfig {
    pub fn limits(&self, train: &[Community]) -> Result<Limits> {
        let cap = match self.size_cap {
            Some(c) => c,
            None => train.iter().map(Community::len).max().unwrap_or(0),
        };
        Limits::new(cap, self.boundary_cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub mean_return: f64,
    pub mean_len: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewriterLog {
    pub epochs: Vec<EpochStats>,
}

impl RewriterLog {
    /// `epoch<TAB>mean_return<TAB>mean_len` lines.
    pub fn to_tsv(&self) -> String {
        self.epochs
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{i}\t{:.6}\t{:.3}\n", e.mean_return, e.mean_len))
            .collect()
    }
}

/// Sampled rollouts for `samples`, each with its own derived stream.
pub fn sample_rollouts(
    env: &Env,
    agent: &AgentParams,
    samples: &[TrainingSample],
    seed: u64,
    exec: &Exec,
) -> Result<Vec<Trajectory>> {
    exec.try_map(samples.len(), |i| {
        let mut sel = Selection::Sample(rng::rng_for(seed, "rollout", i as u64));
        rollout(env, agent, &samples[i].seed, Some(&samples[i].truth), &mut sel)
    })
}

/// Trains the agent on `graph` with frozen node `embeddings`.
pub fn train_rewriter(
    graph: &Graph,
    embeddings: &DenseArray,
    train: &[Community],
    cfg: &RewriterConfig,
    exec: &Exec,
) -> Result<(AgentParams, RewriterLog)> {
    let limits = cfg.limits(train)?;
    let env = Env::new(graph, embeddings, limits)?;
    let mut agent = AgentParams::new(embeddings.cols(), cfg.hidden, cfg.seed)?;
    let mut opt = OptimState::new(agent.params(), cfg.lr);
    let mut log = RewriterLog::default();
    for epoch in 0..cfg.epochs {
        let e = epoch as u64;
        let samples = make_training_samples(
            graph,
            train,
            cfg.radius,
            limits.size_cap,
            cfg.episodes_per_epoch,
            rng::derive(cfg.seed, "epoch-samples", e),
        )?;
        let trajs = sample_rollouts(&env, &agent, &samples, rng::derive(cfg.seed, "epoch-rollouts", e), exec)?;
        let n = trajs.len().max(1) as f64;
        let stats = EpochStats {
            mean_return: trajs.iter().map(Trajectory::total_return).sum::<f64>() / n,
            mean_len: trajs.iter().map(|t| t.len() as f64).sum::<f64>() / n,
        };
        policy_update(&env, &mut agent, &mut opt, &trajs, exec)?;
        log::debug!("rewriter epoch {epoch}: return {:.4}, length {:.2}", stats.mean_return, stats.mean_len);
        log.epochs.push(stats);
    }
    Ok((agent, log))
}

/// Greedy rewrite of one community.
pub fn rewrite(env: &Env, agent: &AgentParams, community: &Community) -> Result<Community> {
    let traj = rollout(env, agent, community, None, &mut Selection::Greedy)?;
    Ok(traj.final_community().clone())
}

pub fn rewrite_all(env: &Env, agent: &AgentParams, communities: &[Community], exec: &Exec) -> Result<Vec<Community>> {
    exec.try_map(communities.len(), |i| rewrite(env, agent, &communities[i]))
}
