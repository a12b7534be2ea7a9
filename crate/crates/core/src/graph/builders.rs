use std::collections::{HashSet, VecDeque};

use rand::seq::index;
use rand::Rng as _;

use super::{Community, Features, Graph};
use crate::error::{Error, Result};
use crate::rng;

/// Disjoint union of `a` and `b` (b's ids offset by `a.node_count()`) plus
/// `link_count` distinct uniformly drawn cross edges.
///
/// Original ids of `b` are shifted past the largest original id of `a` so
/// the id map stays injective.
pub fn build_hybrid(a: &Graph, b: &Graph, link_count: usize, seed: u64) -> Result<Graph> {
    let (na, nb) = (a.node_count(), b.node_count());
    let pairs = na
        .checked_mul(nb)
        .ok_or_else(|| Error::invalid("graphs too large to link"))?;
    if link_count > pairs {
        return Err(Error::invalid(format!(
            "cannot draw {link_count} distinct cross links between {na} and {nb} nodes"
        )));
    }
    let features = match (a.raw_features(), b.raw_features()) {
        (None, None) => None,
        (Some(fa), Some(fb)) if fa.cols == fb.cols => Some(Features {
            rows: na + nb,
            cols: fa.cols,
            values: fa.values.iter().chain(&fb.values).copied().collect(),
        }),
        _ => return Err(Error::invalid("hybrid graphs need matching feature widths")),
    };
    let shift = a.original_ids().iter().max().map_or(0, |m| m + 1);
    let original_ids = a
        .original_ids()
        .iter()
        .copied()
        .chain(b.original_ids().iter().map(|o| o + shift))
        .collect();

    let mut rng = rng::rng_for(seed, "hybrid", 0);
    let mut cross: Vec<usize> = index::sample(&mut rng, pairs, link_count).into_vec();
    cross.sort_unstable();
    let edges = a
        .edges()
        .chain(b.edges().map(|(u, v)| (u + na, v + na)))
        .chain(cross.into_iter().map(|p| (p / nb, na + p % nb)));
    Graph::build(na + nb, edges.collect::<Vec<_>>(), original_ids, features)
}

/// Offsets community ids for the `b` side of a hybrid graph.
pub fn shift_communities(comms: &[Community], offset: usize) -> Vec<Community> {
    comms
        .iter()
        .map(|c| Community::new(c.members().iter().map(|u| u + offset).collect()).expect("non-empty"))
        .collect()
}

/// Planted-partition generator parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedParams {
    pub communities: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub p_in: f64,
    pub cross_links: usize,
    pub seed: u64,
}

fn connected(size: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); size];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; size];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !std::mem::replace(&mut seen[v], true) {
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == size
}

/// Disjoint groups with sizes uniform in `[min_size, max_size]`, each an
/// Erdős–Rényi graph with edge probability `p_in` redrawn until connected,
/// plus `cross_links` distinct random inter-group edges.
pub fn synth_planted(params: &PlantedParams) -> Result<(Graph, Vec<Community>)> {
    let p = params;
    if p.communities == 0 {
        return Err(Error::invalid("need at least one community"));
    }
    if p.min_size < 3 || p.min_size > p.max_size {
        return Err(Error::invalid(format!(
            "size range [{}, {}] invalid (lower bound must be >= 3)",
            p.min_size, p.max_size
        )));
    }
    if !(p.p_in > 0.0 && p.p_in <= 1.0) {
        return Err(Error::invalid(format!("p_in {} not in (0, 1]", p.p_in)));
    }
    let mut rng = rng::rng_for(p.seed, "planted", 0);
    let sizes: Vec<usize> = (0..p.communities)
        .map(|_| rng.gen_range(p.min_size..=p.max_size))
        .collect();
    let n: usize = sizes.iter().sum();
    let inter_pairs = (n * (n - 1) - sizes.iter().map(|s| s * (s - 1)).sum::<usize>()) / 2;
    if p.cross_links > inter_pairs {
        return Err(Error::invalid(format!(
            "{} cross links requested but only {inter_pairs} inter-group pairs exist",
            p.cross_links
        )));
    }

    let mut edges = Vec::new();
    let mut group_of = Vec::with_capacity(n);
    let mut comms = Vec::with_capacity(p.communities);
    let mut start = 0;
    for (g, &size) in sizes.iter().enumerate() {
        let local = loop {
            let mut local = Vec::new();
            for u in 0..size {
                for v in (u + 1)..size {
                    if rng.gen_bool(p.p_in) {
                        local.push((u, v));
                    }
                }
            }
            if connected(size, &local) {
                break local;
            }
        };
        edges.extend(local.into_iter().map(|(u, v)| (u + start, v + start)));
        group_of.extend(std::iter::repeat_n(g, size));
        comms.push(Community::new((start..start + size).collect())?);
        start += size;
    }

    let mut drawn = HashSet::with_capacity(p.cross_links);
    while drawn.len() < p.cross_links {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if group_of[u] != group_of[v] {
            drawn.insert((u.min(v), u.max(v)));
        }
    }
    let mut cross: Vec<_> = drawn.into_iter().collect();
    cross.sort_unstable();
    edges.extend(cross);
    let graph = Graph::from_edges(n, edges)?;
    Ok((graph, comms))
}
