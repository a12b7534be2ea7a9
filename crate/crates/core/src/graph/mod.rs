//! Graph data model, ingestion, ego-net and boundary extraction, feature
//! augmentation, and dataset builders.

mod builders;
mod ego;
mod io;
mod preprocess;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use builders::{build_hybrid, shift_communities, synth_planted, PlantedParams};
pub use ego::{boundary, capped_ego_net, k_ego_net, DEFAULT_BOUNDARY_CAP};
pub use io::{
    load_communities, load_edge_list, load_features, load_id_map, load_raw_communities,
    write_communities, write_edge_list, write_id_map,
};
pub use preprocess::{induced_subgraph, percentile_threshold, preprocess, PreprocessParams};

/// Dense row-major feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Features {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Immutable undirected simple graph.
#[derive(Clone, Debug)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    original_ids: Vec<u64>,
    raw_features: Option<Features>,
    augmented: Features,
}

impl Graph {
    /// Builds a graph from an edge iterator over internal ids `< node_count`.
    /// Self-loops and duplicate edges are dropped.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::build(node_count, edges, (0..node_count as u64).collect(), None)
    }

    pub(crate) fn build<I>(
        node_count: usize,
        edges: I,
        original_ids: Vec<u64>,
        raw_features: Option<Features>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        debug_assert_eq!(original_ids.len(), node_count);
        let mut adjacency = vec![Vec::new(); node_count];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        let mut edge_count = 0;
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
            edge_count += nbrs.len();
        }
        if let Some(f) = &raw_features {
            if f.rows != node_count {
                return Err(Error::invalid(format!(
                    "feature rows {} != node count {node_count}",
                    f.rows
                )));
            }
        }
        let augmented = augment(&adjacency, raw_features.as_ref());
        Ok(Graph {
            adjacency,
            edge_count: edge_count / 2,
            original_ids,
            raw_features,
            augmented,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn original_id(&self, u: usize) -> u64 {
        self.original_ids[u]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    pub fn id_lookup(&self) -> HashMap<u64, usize> {
        self.original_ids
            .iter()
            .enumerate()
            .map(|(i, &o)| (o, i))
            .collect()
    }

    pub fn raw_features(&self) -> Option<&Features> {
        self.raw_features.as_ref()
    }

    /// `x'(u) = [x(u), degree, max, min, mean, std of neighbor degrees]`.
    pub fn augmented_features(&self) -> &Features {
        &self.augmented
    }

    pub fn feature_dim(&self) -> usize {
        self.augmented.cols
    }

    pub fn check_node(&self, u: usize) -> Result<()> {
        if u < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: u,
                node_count: self.node_count(),
            })
        }
    }

    /// Replaces the raw features and recomputes the augmented matrix.
    pub fn with_features(self, features: Features) -> Result<Self> {
        let n = self.node_count();
        let edges: Vec<_> = self.edges().collect();
        Graph::build(n, edges, self.original_ids, Some(features))
    }

    /// Checks adjacency symmetry, absence of self-loops and duplicates.
    pub fn is_consistent(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(u, nbrs)| {
            nbrs.windows(2).all(|w| w[0] < w[1])
                && nbrs.iter().all(|&v| v != u && self.has_edge(v, u))
        }) && self.augmented.rows == self.node_count()
    }
}

fn augment(adjacency: &[Vec<usize>], raw: Option<&Features>) -> Features {
    let f = raw.map_or(1, |r| r.cols);
    let cols = f + 5;
    let mut values = Vec::with_capacity(adjacency.len() * cols);
    for (u, nbrs) in adjacency.iter().enumerate() {
        match raw {
            Some(r) => values.extend_from_slice(r.row(u)),
            None => values.push(1.0),
        }
        values.push(nbrs.len() as f64);
        if nbrs.is_empty() {
            values.extend_from_slice(&[0.0; 4]);
            continue;
        }
        let (mut max, mut min, mut sum) = (f64::MIN, f64::MAX, 0.0);
        for &v in nbrs {
            let d = adjacency[v].len() as f64;
            max = max.max(d);
            min = min.min(d);
            sum += d;
        }
        let mean = sum / nbrs.len() as f64;
        let var = nbrs
            .iter()
            .map(|&v| (adjacency[v].len() as f64 - mean).powi(2))
            .sum::<f64>()
            / nbrs.len() as f64;
        values.extend_from_slice(&[max, min, mean, var.sqrt()]);
    }
    Features {
        rows: adjacency.len(),
        cols,
        values,
    }
}

/// A set of node ids, kept sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Community(Vec<usize>);

impl Community {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyCommunity);
        }
        members.sort_unstable();
        members.dedup();
        Ok(Community(members))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: usize) -> bool {
        self.0.binary_search(&u).is_ok()
    }

    pub fn intersection_len(&self, other: &Community) -> usize {
        sorted_intersection_len(&self.0, &other.0)
    }

    pub fn is_subset_of(&self, other: &Community) -> bool {
        self.intersection_len(other) == self.len()
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        match self.0.last() {
            Some(&u) => graph.check_node(u),
            None => Err(Error::EmptyCommunity),
        }
    }

    pub fn into_members(self) -> Vec<usize> {
        self.0
    }
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Index lists into a [`CommunitySet`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommunitySet {
    pub communities: Vec<Community>,
    pub split: Split,
}

impl CommunitySet {
    /// All communities in the training split (no validation/test).
    pub fn all_train(communities: Vec<Community>) -> Self {
        let train = (0..communities.len()).collect();
        CommunitySet {
            communities,
            split: Split {
                train,
                ..Split::default()
            },
        }
    }

    /// First `train` communities train, next `validation` validate, rest test.
    pub fn with_prefix_split(communities: Vec<Community>, train: usize, validation: usize) -> Result<Self> {
        let n = communities.len();
        if train == 0 || train > n {
            return Err(Error::invalid(format!(
                "training split of {train} from {n} communities"
            )));
        }
        let val_end = (train + validation).min(n);
        Ok(CommunitySet {
            split: Split {
                train: (0..train).collect(),
                validation: (train..val_end).collect(),
                test: (val_end..n).collect(),
            },
            communities,
        })
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    fn pick(&self, idx: &[usize]) -> Vec<Community> {
        idx.iter().map(|&i| self.communities[i].clone()).collect()
    }

    pub fn train(&self) -> Vec<Community> {
        self.pick(&self.split.train)
    }

    pub fn validation(&self) -> Vec<Community> {
        self.pick(&self.split.validation)
    }

    pub fn test(&self) -> Vec<Community> {
        self.pick(&self.split.test)
    }

    pub fn max_train_size(&self) -> usize {
        self.split
            .train
            .iter()
            .map(|&i| self.communities[i].len())
            .max()
            .unwrap_or(0)
    }

    /// Splits are disjoint and the training split is non-empty.
    pub fn validate(&self) -> Result<()> {
        if self.split.train.is_empty() {
            return Err(Error::NoCommunities("empty training split".into()));
        }
        let mut seen = vec![false; self.communities.len()];
        for &i in self
            .split
            .train
            .iter()
            .chain(&self.split.validation)
            .chain(&self.split.test)
        {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("split index {i} invalid or repeated")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn augment_path_middle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.augmented_features().row(1), &[1.0, 2.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn augment_isolated_node() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert_eq!(g.augmented_features().row(2), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn augment_star_center() {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(g.augmented_features().row(0), &[1.0, 3.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn augment_keeps_raw_features() {
        let g = path4()
            .with_features(Features {
                rows: 4,
                cols: 2,
                values: vec![0.5, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            })
            .unwrap();
        assert_eq!(g.feature_dim(), 7);
        // node 1: neighbors 0 (deg 1) and 2 (deg 2)
        let row = g.augmented_features().row(1);
        assert_eq!(&row[..2], &[2.0, 3.0]);
        assert_eq!(&row[2..6], &[2.0, 2.0, 1.0, 1.5]);
        assert!((row[6] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dedup_and_self_loops() {
        let g = Graph::from_edges(2, [(0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.is_consistent());
    }

    #[test]
    fn empty_graph_rejected() {
        assert!(matches!(Graph::from_edges(0, []), Err(Error::EmptyGraph)));
    }

    #[test]
    fn community_set_ops() {
        let a = Community::new(vec![3, 1, 2, 2]).unwrap();
        assert_eq!(a.members(), &[1, 2, 3]);
        let b = Community::new(vec![2, 3, 4]).unwrap();
        assert_eq!(a.intersection_len(&b), 2);
        assert!(!a.is_subset_of(&b));
        assert!(Community::new(vec![2, 3]).unwrap().is_subset_of(&a));
        assert!(Community::new(vec![]).is_err());
    }

    #[test]
    fn prefix_split() {
        let comms: Vec<_> = (0..5).map(|i| Community::new(vec![i]).unwrap()).collect();
        let set = CommunitySet::with_prefix_split(comms, 2, 1).unwrap();
        assert_eq!(set.split.train, vec![0, 1]);
        assert_eq!(set.split.validation, vec![2]);
        assert_eq!(set.split.test, vec![3, 4]);
        set.validate().unwrap();
    }
}
