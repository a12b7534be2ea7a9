use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{Community, Graph};
use crate::ndiff::{dropout_mask, glorot, Aggregation, DenseArray, ParamSet, Tape, Var};
use crate::rng;

/// Encoder weights: input transform, `k` GCN layers, and the output
/// transform over the concatenated layer outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    set: ParamSet,
    layers: usize,
    dim: usize,
}

impl EncoderParams {
    pub fn new(in_dim: usize, dim: usize, layers: usize, seed: u64) -> Result<Self> {
        if !(1..=2).contains(&layers) || dim == 0 || in_dim == 0 {
            return Err(Error::invalid(format!(
                "encoder needs 1 or 2 layers and positive dims (got layers={layers}, dim={dim}, in={in_dim})"
            )));
        }
        let mut r = rng::rng_for(seed, "encoder-init", 0);
        let mut set = ParamSet::default();
        set.push("w_in", glorot(in_dim, dim, &mut r));
        for l in 0..layers {
            set.push(format!("gcn{l}"), glorot(dim, dim, &mut r));
        }
        set.push("w_out", glorot((layers + 1) * dim, dim, &mut r));
        Ok(EncoderParams { set, layers, dim })
    }

    /// Rebuilds from a checkpointed set, validating names and shapes.
    pub fn from_param_set(set: ParamSet) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("not an encoder checkpoint: {m}"));
        if set.len() < 3 || set.name(0) != "w_in" || set.name(set.len() - 1) != "w_out" {
            return Err(bad("layout"));
        }
        let layers = set.len() - 2;
        let dim = set.get(0).cols();
        for l in 0..layers {
            if set.name(l + 1) != format!("gcn{l}") || set.get(l + 1).shape() != (dim, dim) {
                return Err(bad("gcn layer"));
            }
        }
        if set.get(layers + 1).shape() != ((layers + 1) * dim, dim) {
            return Err(bad("output shape"));
        }
        Ok(EncoderParams { set, layers, dim })
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

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn in_dim(&self) -> usize {
        self.set.get(0).rows()
    }

    /// Records the node-level encoder on `tape` for the given subgraph:
    /// `z⁽⁰⁾ = x'·W¹` (with optional dropout), `k` GCN layers, then
    /// `z = concat(z⁽⁰⁾..z⁽ᵏ⁾)·W²`. Returns the `n × d` node embeddings.
    pub(crate) fn forward_nodes(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        features: DenseArray,
        agg: &Arc<Aggregation>,
        mode: EncodeMode,
    ) -> Result<Var> {
        if features.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "encoder input",
                lhs: features.shape(),
                rhs: self.set.get(0).shape(),
            });
        }
        let rows = features.rows();
        let x = tape.constant(features)?;
        let mut h = tape.matmul(x, vars[0])?;
        if let EncodeMode::Train { dropout, seed } = mode {
            if dropout > 0.0 {
                let mask = dropout_mask(rows, self.dim, dropout, &mut rng::rng(seed))?;
                let m = tape.constant(mask)?;
                h = tape.mul(h, m)?;
            }
        }
        let mut outs = vec![h];
        for l in 0..self.layers {
            h = tape.gcn_layer(h, agg, vars[1 + l])?;
            outs.push(h);
        }
        let cat = tape.concat_cols(&outs)?;
        tape.matmul(cat, vars[self.layers + 1])
    }

    /// Records the community embedding `Σ_{u ∈ C} z(u)` (a `1 × d` row)
    /// computed on the induced subgraph of `community`.
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        graph: &Graph,
        community: &Community,
        mode: EncodeMode,
    ) -> Result<Var> {
        if community.is_empty() {
            return Err(Error::EmptyCommunity);
        }
        community.validate(graph)?;
        let (features, agg) = induced(graph, community);
        let z = self.forward_nodes(tape, vars, features, &Arc::new(agg), mode)?;
        tape.sum_rows(z)
    }
}

/// Whether dropout is active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EncodeMode {
    Inference,
    Train { dropout: f64, seed: u64 },
}

/// Augmented features of the members and GCN propagation over their
/// induced subgraph, with local ids in member order.
fn induced(graph: &Graph, community: &Community) -> (DenseArray, Aggregation) {
    let members = community.members();
    let feats = graph.augmented_features();
    let values = members.iter().flat_map(|&u| feats.row(u).iter().copied()).collect();
    let features = DenseArray::from_vec(members.len(), feats.cols, values).expect("shape");
    let local: Vec<Vec<usize>> = members
        .iter()
        .map(|&u| {
            graph
                .neighbors(u)
                .iter()
                .filter_map(|v| members.binary_search(v).ok())
                .collect()
        })
        .collect();
    (features, Aggregation::gcn(&local))
}

/// Community embedding as a plain vector.
pub fn encode_community(graph: &Graph, community: &Community, params: &EncoderParams, mode: EncodeMode) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = tape.params(params.params())?;
    let z = params.encode_on_tape(&mut tape, &vars, graph, community, mode)?;
    Ok(tape.value(z).values().to_vec())
}

/// Per-node embeddings `z(u)` computed over the whole graph (inference mode).
pub fn node_embeddings(graph: &Graph, params: &EncoderParams) -> Result<DenseArray> {
    let adj: Vec<Vec<usize>> = (0..graph.node_count()).map(|u| graph.neighbors(u).to_vec()).collect();
    let feats = graph.augmented_features();
    let features = DenseArray::from_vec(feats.rows, feats.cols, feats.values.clone())?;
    let mut tape = Tape::new();
    let vars = tape.params(params.params())?;
    let z = params.forward_nodes(&mut tape, &vars, features, &Arc::new(Aggregation::gcn(&adj)), EncodeMode::Inference)?;
    Ok(tape.value(z).clone())
}
