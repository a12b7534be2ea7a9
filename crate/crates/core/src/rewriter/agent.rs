use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ndiff::{glorot, Aggregation, DenseArray, ParamSet, Tape, Var};
use crate::rng;

const NAMES: [&str; 9] = [
    "theta",
    "exclude_w1",
    "exclude_b1",
    "exclude_w2",
    "exclude_b2",
    "expand_w1",
    "expand_b1",
    "expand_w2",
    "expand_b2",
];

const THETA: usize = 0;
// First index of each head's (w1, b1, w2, b2).
const EXCLUDE: usize = 1;
const EXPAND: usize = 5;

/// Rewriting agent: a GIN layer that refreshes node states between steps
/// and two scoring heads (exclusion, expansion), each a one-hidden-layer
/// MLP that maps a node state to a logit.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    set: ParamSet,
}

impl AgentParams {
    /// `dim` is the node-embedding width; states carry one extra indicator
    /// column.
    pub fn new(dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::invalid("agent dimensions must be positive"));
        }
        let mut r = rng::rng_for(seed, "agent-init", 0);
        let state = dim + 1;
        let mut set = ParamSet::default();
        set.push(NAMES[THETA], glorot(state, dim, &mut r));
        for head in [EXCLUDE, EXPAND] {
            set.push(NAMES[head], glorot(state, hidden, &mut r));
            set.push(NAMES[head + 1], DenseArray::zeros(1, hidden));
            set.push(NAMES[head + 2], glorot(hidden, 1, &mut r));
            set.push(NAMES[head + 3], DenseArray::zeros(1, 1));
        }
        Self::from_param_set(set)
    }

    /// Checks names and shapes of a loaded parameter set.
    pub fn from_param_set(set: ParamSet) -> Result<Self> {
        let bad = |msg: String| Err(Error::Checkpoint(msg));
        if set.len() != NAMES.len() {
            return bad(format!("agent checkpoint has {} arrays, expected {}", set.len(), NAMES.len()));
        }
        for (i, name) in NAMES.iter().enumerate() {
            if set.name(i) != *name {
                return bad(format!("agent array {i} is '{}', expected '{name}'", set.name(i)));
            }
        }
        let (state, dim) = set.get(THETA).shape();
        if state != dim + 1 || dim == 0 {
            return bad(format!("theta has shape {state}x{dim}, expected (d+1)xd"));
        }
        let hidden = set.get(EXCLUDE).cols();
        for head in [EXCLUDE, EXPAND] {
            let shapes = [(state, hidden), (1, hidden), (hidden, 1), (1, 1)];
            for (j, want) in shapes.iter().enumerate() {
                let got = set.get(head + j).shape();
                if got != *want {
                    return bad(format!("'{}' has shape {got:?}, expected {want:?}", set.name(head + j)));
                }
            }
        }
        Ok(AgentParams { set })
    }

    pub fn params(&self) -> &ParamSet {
        &self.set
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.set
    }

    pub fn into_params(self) -> ParamSet {
        self.set
    }

    /// Node-embedding width the agent expects.
    pub fn dim(&self) -> usize {
        self.set.get(THETA).cols()
    }

    pub fn hidden(&self) -> usize {
        self.set.get(EXCLUDE).cols()
    }
}

fn head(tape: &mut Tape, states: Var, v: &[Var]) -> Result<Var> {
    let h = tape.linear(states, v[0], Some(v[1]))?;
    let h = tape.relu(h)?;
    tape.linear(h, v[2], Some(v[3]))
}

/// Exclusion and expansion logits, one row per state row.
pub(crate) fn head_logits(tape: &mut Tape, vars: &[Var], states: Var) -> Result<(Var, Var)> {
    let exclude = head(tape, states, &vars[EXCLUDE..EXCLUDE + 4])?;
    let expand = head(tape, states, &vars[EXPAND..EXPAND + 4])?;
    Ok((exclude, expand))
}

/// One GIN pass with the state-refresh weights.
pub(crate) fn refresh_layer(tape: &mut Tape, vars: &[Var], states: Var, agg: &Arc<Aggregation>) -> Result<Var> {
    tape.gin_layer(states, agg, vars[THETA])
}
