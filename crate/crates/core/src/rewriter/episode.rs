use std::sync::Arc;

use rand::Rng as _;

use super::agent::{head_logits, refresh_layer, AgentParams};
use crate::error::{Error, Result};
use crate::graph::{boundary, Community, Graph};
use crate::metrics::f1_pair;
use crate::ndiff::{masked_softmax, Aggregation, DenseArray, Tape, Var};
use crate::rng::Rng;

/// Minimum number of steps an episode may take regardless of the size cap.
const MIN_STEP_CAP: usize = 20;

/// A head's choice: move a node, or select the virtual node and stop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Node(usize),
    Stop,
}

/// Episode bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Expansion stops once the community reaches this size.
    pub size_cap: usize,
    /// At most this many boundary nodes are offered for expansion.
    pub boundary_cap: usize,
}

impl Limits {
    pub fn new(size_cap: usize, boundary_cap: usize) -> Result<Self> {
        if size_cap == 0 || boundary_cap == 0 {
            return Err(Error::invalid("size and boundary caps must be positive"));
        }
        Ok(Limits { size_cap, boundary_cap })
    }

    pub fn step_cap(&self) -> usize {
        self.size_cap.max(MIN_STEP_CAP)
    }
}

/// Everything an episode reads but never changes.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    graph: &'a Graph,
    embeddings: &'a DenseArray,
    limits: Limits,
}

impl<'a> Env<'a> {
    /// `embeddings` holds one row per graph node.
    pub fn new(graph: &'a Graph, embeddings: &'a DenseArray, limits: Limits) -> Result<Self> {
        if embeddings.rows() != graph.node_count() {
            return Err(Error::Shape {
                op: "rewriter embeddings",
                lhs: embeddings.shape(),
                rhs: (graph.node_count(), embeddings.cols()),
            });
        }
        Ok(Env { graph, embeddings, limits })
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn embeddings(&self) -> &'a DenseArray {
        self.embeddings
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }
}

/// Node sets and stop flags of an episode; the state rows live elsewhere.
#[derive(Clone, Debug, PartialEq)]
struct Frame {
    community: Community,
    boundary: Vec<usize>,
    // Community and boundary merged and sorted. Row i of the state matrix
    // belongs to nodes[i]; the extra last row is the virtual node.
    nodes: Vec<usize>,
    exclude_done: bool,
    expand_done: bool,
    step: usize,
}

impl Frame {
    fn new(env: &Env, community: Community) -> Frame {
        let boundary = boundary(env.graph, &community, env.limits.boundary_cap);
        let nodes = merge(community.members(), &boundary);
        Frame {
            community,
            boundary,
            nodes,
            exclude_done: false,
            expand_done: false,
            step: 0,
        }
    }

    fn finished(&self) -> bool {
        self.exclude_done && self.expand_done
    }

    fn exclude_forced(&self) -> bool {
        self.exclude_done || self.community.len() == 1
    }

    fn expand_forced(&self, limits: Limits) -> bool {
        self.expand_done || self.community.len() >= limits.size_cap || self.boundary.is_empty()
    }

    fn virtual_row(&self) -> usize {
        self.nodes.len()
    }

    fn exclude_mask(&self) -> Vec<bool> {
        let mut m: Vec<bool> = self.nodes.iter().map(|&u| self.community.contains(u)).collect();
        m.push(true);
        m
    }

    fn expand_mask(&self) -> Vec<bool> {
        let mut m: Vec<bool> = self.nodes.iter().map(|&u| self.boundary.binary_search(&u).is_ok()).collect();
        m.push(true);
        m
    }

    fn action_at(&self, row: usize) -> Action {
        if row == self.virtual_row() {
            Action::Stop
        } else {
            Action::Node(self.nodes[row])
        }
    }

    fn row_of(&self, action: Action) -> Result<usize> {
        match action {
            Action::Stop => Ok(self.virtual_row()),
            Action::Node(u) => self
                .nodes
                .binary_search(&u)
                .map_err(|_| Error::InvalidAction(format!("node {u} is not in the episode state"))),
        }
    }

    /// Applies exclusion then expansion. Returns the next frame and the
    /// intermediate community (after exclusion only).
    fn advance(&self, env: &Env, decision: &Decision) -> Result<(Frame, Community)> {
        if self.finished() {
            return Err(Error::InvalidAction("episode already finished".into()));
        }
        let forced_ex = self.exclude_forced();
        let forced_exp = self.expand_forced(env.limits);
        if forced_ex && decision.exclude != Action::Stop {
            return Err(Error::InvalidAction("exclusion must stop".into()));
        }
        if forced_exp && decision.expand != Action::Stop {
            return Err(Error::InvalidAction("expansion must stop".into()));
        }
        let mut members = self.community.members().to_vec();
        if let Action::Node(v) = decision.exclude {
            if !self.community.contains(v) {
                return Err(Error::InvalidAction(format!("cannot exclude non-member {v}")));
            }
            members.retain(|&u| u != v);
        }
        let middle = Community::new(members.clone())?;
        if let Action::Node(w) = decision.expand {
            if self.boundary.binary_search(&w).is_err() {
                return Err(Error::InvalidAction(format!("cannot expand to non-boundary node {w}")));
            }
            members.push(w);
        }
        let mut next = Frame::new(env, Community::new(members)?);
        next.exclude_done = self.exclude_done || decision.exclude == Action::Stop;
        next.expand_done = self.expand_done || decision.expand == Action::Stop;
        next.step = self.step + 1;
        Ok((next, middle))
    }
}

fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn indicator(frame: &Frame) -> Result<DenseArray> {
    let mut col: Vec<f64> = frame
        .nodes
        .iter()
        .map(|&u| if frame.community.contains(u) { 1.0 } else { 0.0 })
        .collect();
    col.push(0.0);
    DenseArray::from_vec(col.len(), 1, col)
}

/// Initial states: `[z(u), 1{u in C}]` per node, zeros for the virtual node.
fn initial_states(env: &Env, frame: &Frame) -> Result<DenseArray> {
    let d = env.embeddings.cols();
    let mut values = Vec::with_capacity((frame.nodes.len() + 1) * (d + 1));
    for &u in &frame.nodes {
        values.extend_from_slice(env.embeddings.row(u));
        values.push(if frame.community.contains(u) { 1.0 } else { 0.0 });
    }
    values.resize((frame.nodes.len() + 1) * (d + 1), 0.0);
    DenseArray::from_vec(frame.nodes.len() + 1, d + 1, values)
}

/// GIN aggregation over the subgraph induced by `nodes`, plus an isolated
/// virtual node as the last row.
fn local_aggregation(graph: &Graph, nodes: &[usize]) -> Arc<Aggregation> {
    let mut adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&u| {
            graph
                .neighbors(u)
                .iter()
                .filter_map(|v| nodes.binary_search(v).ok())
                .collect()
        })
        .collect();
    adj.push(Vec::new());
    Arc::new(Aggregation::gin(&adj))
}

/// Next-step states. Nodes already present carry their previous state
/// (with its old indicator); newcomers enter as `[z(u), 0]`. One GIN pass
/// over the new node set, then the fresh indicator is appended.
fn refresh_on_tape(env: &Env, tape: &mut Tape, vars: &[Var], prev: Var, prev_nodes: &[usize], next: &Frame) -> Result<Var> {
    let d = env.embeddings.cols();
    let carried = prev_nodes.len() + 1;
    let mut newcomers = Vec::new();
    let mut idx = Vec::with_capacity(next.nodes.len() + 1);
    for &u in &next.nodes {
        match prev_nodes.binary_search(&u) {
            Ok(i) => idx.push(i),
            Err(_) => {
                idx.push(carried + newcomers.len() / (d + 1));
                newcomers.extend_from_slice(env.embeddings.row(u));
                newcomers.push(0.0);
            }
        }
    }
    idx.push(prev_nodes.len());
    let stacked = if newcomers.is_empty() {
        prev
    } else {
        let rows = newcomers.len() / (d + 1);
        let fresh = tape.constant(DenseArray::from_vec(rows, d + 1, newcomers)?)?;
        tape.concat_rows(&[prev, fresh])?
    };
    let input = tape.gather_rows(stacked, &idx)?;
    let agg = local_aggregation(env.graph, &next.nodes);
    let h = refresh_layer(tape, vars, input, &agg)?;
    let ind = tape.constant(indicator(next)?)?;
    tape.concat_cols(&[h, ind])
}

/// Episode state: node sets, stop flags and one state row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    frame: Frame,
    states: DenseArray,
}

impl EpisodeState {
    pub fn community(&self) -> &Community {
        &self.frame.community
    }

    /// Boundary offered for expansion (capped).
    pub fn boundary(&self) -> &[usize] {
        &self.frame.boundary
    }

    /// Node of each state row except the last (virtual) one.
    pub fn nodes(&self) -> &[usize] {
        &self.frame.nodes
    }

    pub fn states(&self) -> &DenseArray {
        &self.states
    }

    pub fn exclude_done(&self) -> bool {
        self.frame.exclude_done
    }

    pub fn expand_done(&self) -> bool {
        self.frame.expand_done
    }

    pub fn step(&self) -> usize {
        self.frame.step
    }

    pub fn is_finished(&self) -> bool {
        self.frame.finished()
    }

    /// Whether the exclusion head has no choice but to stop.
    pub fn exclude_forced(&self) -> bool {
        self.frame.exclude_forced()
    }

    pub fn expand_forced(&self, limits: Limits) -> bool {
        self.frame.expand_forced(limits)
    }
}

/// Both heads' choices for one step. A log-probability of `None` marks a
/// forced stop, which carries no gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub exclude: Action,
    pub expand: Action,
    pub exclude_logp: Option<f64>,
    pub expand_logp: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRewards {
    pub exclude: f64,
    pub expand: f64,
}

impl StepRewards {
    pub fn total(&self) -> f64 {
        self.exclude + self.expand
    }
}

/// How a head turns its distribution into an action.
#[derive(Clone, Debug)]
pub enum Selection {
    Sample(Rng),
    /// Most probable action; ties go to the lowest state row.
    Greedy,
}

impl Selection {
    fn pick(&mut self, probs: &[f64], mask: &[bool]) -> usize {
        let allowed = || (0..probs.len()).filter(|&i| mask[i]);
        match self {
            Selection::Greedy => allowed().fold(None, |best: Option<usize>, i| match best {
                Some(b) if probs[b] >= probs[i] => Some(b),
                _ => Some(i),
            }),
            Selection::Sample(r) => {
                let u: f64 = r.gen();
                let mut acc = 0.0;
                allowed().find(|&i| {
                    acc += probs[i];
                    u < acc
                })
                .or_else(|| allowed().next_back())
            }
        }
        .expect("mask always admits the virtual node")
    }
}

pub fn init_state(env: &Env, agent: &AgentParams, seed: &Community) -> Result<EpisodeState> {
    seed.validate(env.graph)?;
    if agent.dim() != env.embeddings.cols() {
        return Err(Error::Shape {
            op: "agent dimension",
            lhs: (agent.dim(), agent.dim()),
            rhs: env.embeddings.shape(),
        });
    }
    let frame = Frame::new(env, seed.clone());
    let states = initial_states(env, &frame)?;
    Ok(EpisodeState { frame, states })
}

/// Scores every state row with both heads and picks one action per head
/// from the masked distributions.
pub fn step_policy(env: &Env, agent: &AgentParams, state: &EpisodeState, selection: &mut Selection) -> Result<Decision> {
    if state.is_finished() {
        return Err(Error::InvalidAction("episode already finished".into()));
    }
    let mut tape = Tape::new();
    let vars = tape.params(agent.params())?;
    let states = tape.constant(state.states.clone())?;
    let (ex_logits, exp_logits) = head_logits(&mut tape, &vars, states)?;
    let frame = &state.frame;
    let mut choose = |logits: Var, mask: Vec<bool>, forced: bool| -> Result<(Action, Option<f64>)> {
        if forced {
            return Ok((Action::Stop, None));
        }
        let probs = masked_softmax(tape.value(logits).values(), &mask)?;
        let row = selection.pick(&probs, &mask);
        Ok((frame.action_at(row), Some(probs[row].ln())))
    };
    let (exclude, exclude_logp) = choose(ex_logits, frame.exclude_mask(), frame.exclude_forced())?;
    let (expand, expand_logp) = choose(exp_logits, frame.expand_mask(), frame.expand_forced(env.limits))?;
    Ok(Decision {
        exclude,
        expand,
        exclude_logp,
        expand_logp,
    })
}

/// F1 gain of moving from `prev` to `next` against `truth`.
pub fn reward(prev: &Community, next: &Community, truth: &Community) -> Result<f64> {
    Ok(f1_pair(next, truth)? - f1_pair(prev, truth)?)
}

/// Applies exclusion, then expansion, then refreshes the states. With a
/// ground truth the rewards are the F1 gains of each half-step.
pub fn apply_actions(
    env: &Env,
    agent: &AgentParams,
    state: &EpisodeState,
    decision: &Decision,
    truth: Option<&Community>,
) -> Result<(EpisodeState, StepRewards)> {
    let (next, middle) = state.frame.advance(env, decision)?;
    let rewards = match truth {
        Some(t) => StepRewards {
            exclude: reward(&state.frame.community, &middle, t)?,
            expand: reward(&middle, &next.community, t)?,
        },
        None => StepRewards::default(),
    };
    let states = if next.finished() {
        // Both heads stopped, so the node sets are unchanged.
        state.states.clone()
    } else {
        let mut tape = Tape::new();
        let vars = tape.params(agent.params())?;
        let prev = tape.constant(state.states.clone())?;
        let out = refresh_on_tape(env, &mut tape, &vars, prev, &state.frame.nodes, &next)?;
        tape.value(out).clone()
    };
    Ok((EpisodeState { frame: next, states }, rewards))
}

/// One recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub decision: Decision,
    pub rewards: StepRewards,
    /// Community after the step.
    pub community: Community,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Community,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn final_community(&self) -> &Community {
        self.steps.last().map_or(&self.initial, |s| &s.community)
    }

    pub fn total_return(&self) -> f64 {
        self.steps.iter().map(|s| s.rewards.total()).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Runs an episode from `seed` until both heads stop or the step cap hits.
pub fn rollout(
    env: &Env,
    agent: &AgentParams,
    seed: &Community,
    truth: Option<&Community>,
    selection: &mut Selection,
) -> Result<Trajectory> {
    let mut state = init_state(env, agent, seed)?;
    let mut steps = Vec::new();
    while !state.is_finished() && state.step() < env.limits.step_cap() {
        let decision = step_policy(env, agent, &state, selection)?;
        let (next, rewards) = apply_actions(env, agent, &state, &decision, truth)?;
        steps.push(StepRecord {
            decision,
            rewards,
            community: next.community().clone(),
        });
        state = next;
    }
    Ok(Trajectory {
        initial: seed.clone(),
        steps,
    })
}

/// Replays `traj` with its recorded actions on `tape` and returns
/// `Σ_t log π(a_t) · r_t` over the non-forced head decisions, or `None`
/// when there are none.
pub(crate) fn surrogate_on_tape(env: &Env, tape: &mut Tape, vars: &[Var], traj: &Trajectory) -> Result<Option<Var>> {
    let mut frame = Frame::new(env, traj.initial.clone());
    let mut states = tape.constant(initial_states(env, &frame)?)?;
    let mut terms = Vec::new();
    for rec in &traj.steps {
        let (ex_logits, exp_logits) = head_logits(tape, vars, states)?;
        let d = &rec.decision;
        if d.exclude_logp.is_some() {
            let lp = tape.log_softmax_pick(ex_logits, &frame.exclude_mask(), frame.row_of(d.exclude)?)?;
            terms.push(tape.scale(lp, rec.rewards.exclude)?);
        }
        if d.expand_logp.is_some() {
            let lp = tape.log_softmax_pick(exp_logits, &frame.expand_mask(), frame.row_of(d.expand)?)?;
            terms.push(tape.scale(lp, rec.rewards.expand)?);
        }
        let (next, _) = frame.advance(env, d)?;
        if !next.finished() {
            states = refresh_on_tape(env, tape, vars, states, &frame.nodes, &next)?;
        }
        frame = next;
    }
    if terms.is_empty() {
        Ok(None)
    } else {
        tape.add_n(&terms).map(Some)
    }
}
