use rand::seq::index;

use super::{boundary, Community, Features, Graph};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessParams {
    /// Communities larger than this percentile of the size distribution are dropped.
    pub percentile: f64,
    /// Number of communities kept after the size filter.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            percentile: 0.9,
            sample_count: 1000,
            seed: 0,
        }
    }
}

/// Percentile of a size list, read off the sorted list at rank
/// `floor(p * (n - 1))` (0-based). `p = 1` returns the maximum.
pub fn percentile_threshold(sizes: &[usize], percentile: f64) -> Option<usize> {
    if sizes.is_empty() {
        return None;
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let rank = (percentile * (sorted.len() - 1) as f64).floor() as usize;
    Some(sorted[rank.min(sorted.len() - 1)])
}

/// Induced subgraph on `nodes` (any order, duplicates allowed). Returns the
/// subgraph and the old-to-new id map.
pub fn induced_subgraph(graph: &Graph, nodes: &[usize]) -> Result<(Graph, Vec<Option<usize>>)> {
    let mut keep = nodes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let mut remap = vec![None; graph.node_count()];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = Some(new);
    }
    let edges: Vec<(usize, usize)> = graph
        .edges()
        .filter_map(|(u, v)| Some((remap[u]?, remap[v]?)))
        .collect();
    let original_ids = keep.iter().map(|&u| graph.original_id(u)).collect();
    let features = graph.raw_features().map(|f| Features {
        rows: keep.len(),
        cols: f.cols,
        values: keep.iter().flat_map(|&u| f.row(u).iter().copied()).collect(),
    });
    let sub = Graph::build(keep.len(), edges, original_ids, features)?;
    Ok((sub, remap))
}

/// Drops oversized communities, samples up to `sample_count` of the rest
/// (keeping input order), and restricts the graph to community nodes plus
/// their outer boundaries. All edges among retained nodes are kept.
pub fn preprocess(
    graph: &Graph,
    comms: &[Community],
    params: &PreprocessParams,
) -> Result<(Graph, Vec<Community>)> {
    if !(params.percentile > 0.0 && params.percentile <= 1.0) {
        return Err(Error::invalid(format!("percentile {} not in (0, 1]", params.percentile)));
    }
    if params.sample_count == 0 {
        return Err(Error::invalid("sample_count must be at least 1"));
    }
    let sizes: Vec<usize> = comms.iter().map(Community::len).collect();
    let threshold = percentile_threshold(&sizes, params.percentile)
        .ok_or_else(|| Error::NoCommunities("nothing to preprocess".into()))?;
    let kept: Vec<&Community> = comms.iter().filter(|c| c.len() <= threshold).collect();
    if kept.is_empty() {
        return Err(Error::NoCommunities("size filter removed every community".into()));
    }
    let chosen: Vec<&Community> = if params.sample_count >= kept.len() {
        kept
    } else {
        let mut rng = rng::rng_for(params.seed, "preprocess", 0);
        let mut idx = index::sample(&mut rng, kept.len(), params.sample_count).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| kept[i]).collect()
    };

    let mut nodes = Vec::new();
    for c in &chosen {
        nodes.extend_from_slice(c.members());
        nodes.extend(boundary(graph, c, usize::MAX));
    }
    let (sub, remap) = induced_subgraph(graph, &nodes)?;
    let comms = chosen
        .into_iter()
        .map(|c| {
            Community::new(c.members().iter().map(|&u| remap[u].expect("member retained")).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sub, comms))
}
