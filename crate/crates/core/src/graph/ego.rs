use std::collections::{HashMap, VecDeque};

use super::{Community, Graph};
use crate::error::{Error, Result};

pub const DEFAULT_BOUNDARY_CAP: usize = 10;

/// Nodes within `k` hops of `center` paired with their hop distance, in BFS
/// order.
fn bfs_hops(graph: &Graph, center: usize, k: usize) -> Vec<(usize, usize)> {
    let mut dist: HashMap<usize, usize> = HashMap::from([(center, 0)]);
    let mut order = vec![(center, 0)];
    let mut queue = VecDeque::from([center]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == k {
            continue;
        }
        for &v in graph.neighbors(u) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                e.insert(d + 1);
                order.push((v, d + 1));
                queue.push_back(v);
            }
        }
    }
    order
}

/// All nodes at hop distance at most `k` from `center`, center included.
pub fn k_ego_net(graph: &Graph, center: usize, k: usize) -> Result<Community> {
    graph.check_node(center)?;
    if k == 0 {
        return Err(Error::invalid("ego-net radius must be at least 1"));
    }
    Community::new(bfs_hops(graph, center, k).into_iter().map(|(u, _)| u).collect())
}

/// The k-ego net truncated to at most `cap` nodes, keeping the nearest hops
/// first and, within the cut hop, the smallest ids.
pub fn capped_ego_net(graph: &Graph, center: usize, k: usize, cap: usize) -> Result<Community> {
    graph.check_node(center)?;
    if k == 0 || cap == 0 {
        return Err(Error::invalid("ego-net radius and cap must be at least 1"));
    }
    let mut hops = bfs_hops(graph, center, k);
    if hops.len() > cap {
        hops.sort_unstable_by_key(|&(u, d)| (d, u));
        hops.truncate(cap);
    }
    Community::new(hops.into_iter().map(|(u, _)| u).collect())
}

/// Outer boundary `∪ N(u) \ C`. When larger than `cap`, keeps the nodes with
/// the most links into the community, ties broken by smaller id. Returned
/// sorted by id.
pub fn boundary(graph: &Graph, community: &Community, cap: usize) -> Vec<usize> {
    let mut links: HashMap<usize, usize> = HashMap::new();
    for &u in community.members() {
        for &v in graph.neighbors(u) {
            if !community.contains(v) {
                *links.entry(v).or_default() += 1;
            }
        }
    }
    let mut nodes: Vec<(usize, usize)> = links.into_iter().collect();
    if nodes.len() > cap {
        nodes.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        nodes.truncate(cap);
    }
    let mut out: Vec<usize> = nodes.into_iter().map(|(u, _)| u).collect();
    out.sort_unstable();
    out
}
