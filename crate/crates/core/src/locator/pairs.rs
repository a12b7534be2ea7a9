use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Community, Graph};
use crate::rng::{self, Rng};

/// Training pairs for the margin loss.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairBatch {
    /// `(sub, super)` with `sub ⊂ super`.
    pub positives: Vec<(Community, Community)>,
    /// `(a, b)` with `a ⊄ b`.
    pub negatives: Vec<(Community, Community)>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Connected subgraph of `within` grown by BFS from `start` with shuffled
/// neighbour order, truncated to `size` nodes (or the reachable part).
pub fn connected_sample(graph: &Graph, within: &Community, start: usize, size: usize, rng: &mut Rng) -> Result<Community> {
    let mut seen = vec![start];
    let mut queue = VecDeque::from([start]);
    'grow: while let Some(u) = queue.pop_front() {
        let mut nbrs: Vec<usize> = graph
            .neighbors(u)
            .iter()
            .copied()
            .filter(|&v| within.contains(v))
            .collect();
        nbrs.shuffle(rng);
        for v in nbrs {
            if seen.len() >= size {
                break 'grow;
            }
            if !seen.contains(&v) {
                seen.push(v);
                queue.push_back(v);
            }
        }
    }
    seen.truncate(size.max(1));
    Community::new(seen)
}

fn random_member(c: &Community, rng: &mut Rng) -> usize {
    c.members()[rng.gen_range(0..c.len())]
}

const ATTEMPTS_PER_PAIR: usize = 64;

/// Draws `per_batch` positive and `per_batch` negative pairs from the
/// training communities.
///
/// Positives: a connected `C_j ⊆ Ċ_k` of random size `≥ 2`, then a
/// connected `C_i ⊂ C_j`. Negatives: connected subgraphs of two different
/// training communities, kept only when the first is not a subset of the
/// second.
pub fn sample_pairs(graph: &Graph, train: &[Community], per_batch: usize, seed: u64) -> Result<PairBatch> {
    if train.len() < 2 {
        return Err(Error::invalid("negative pairs need at least two training communities"));
    }
    for c in train {
        c.validate(graph)?;
    }
    let mut r = rng::rng_for(seed, "pairs", 0);
    let budget = per_batch.max(1) * ATTEMPTS_PER_PAIR;

    let mut positives = Vec::with_capacity(per_batch);
    let mut tries = 0;
    while positives.len() < per_batch {
        tries += 1;
        if tries > budget {
            return Err(Error::invalid("no training community yields a connected pair of size >= 2"));
        }
        let host = &train[r.gen_range(0..train.len())];
        if host.len() < 2 {
            continue;
        }
        let size = r.gen_range(2..=host.len());
        let start = random_member(host, &mut r);
        let sup = connected_sample(graph, host, start, size, &mut r)?;
        if sup.len() < 2 {
            continue;
        }
        let sub_size = r.gen_range(1..sup.len());
        let sub_start = random_member(&sup, &mut r);
        let sub = connected_sample(graph, &sup, sub_start, sub_size, &mut r)?;
        debug_assert!(sub.len() < sup.len() && sub.is_subset_of(&sup));
        positives.push((sub, sup));
    }

    let mut negatives = Vec::with_capacity(per_batch);
    tries = 0;
    while negatives.len() < per_batch {
        tries += 1;
        if tries > budget {
            return Err(Error::invalid("no valid negative pair could be constructed"));
        }
        let p = r.gen_range(0..train.len());
        let mut q = r.gen_range(0..train.len() - 1);
        if q >= p {
            q += 1;
        }
        let (cp, cq) = (&train[p], &train[q]);
        let size_a = r.gen_range(1..=cp.len());
        let start_a = random_member(cp, &mut r);
        let a = connected_sample(graph, cp, start_a, size_a, &mut r)?;
        let size_b = r.gen_range(1..=cq.len());
        let start_b = random_member(cq, &mut r);
        let b = connected_sample(graph, cq, start_b, size_b, &mut r)?;
        if !a.is_subset_of(&b) {
            negatives.push((a, b));
        }
    }
    Ok(PairBatch { positives, negatives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{synth_planted, PlantedParams};

    fn data() -> (Graph, Vec<Community>) {
        synth_planted(&PlantedParams {
            communities: 6,
            min_size: 4,
            max_size: 9,
            p_in: 0.5,
            cross_links: 12,
            seed: 4,
        })
        .unwrap()
    }

    fn connected_within(g: &Graph, c: &Community) -> bool {
        let start = c.members()[0];
        let mut seen = vec![start];
        let mut i = 0;
        while i < seen.len() {
            for &v in g.neighbors(seen[i]) {
                if c.contains(v) && !seen.contains(&v) {
                    seen.push(v);
                }
            }
            i += 1;
        }
        seen.len() == c.len()
    }

    #[test]
    fn positives_and_negatives_valid() {
        let (g, comms) = data();
        let b = sample_pairs(&g, &comms, 50, 3).unwrap();
        assert_eq!(b.positives.len(), 50);
        assert_eq!(b.negatives.len(), 50);
        for (sub, sup) in &b.positives {
            assert!(sub.is_subset_of(sup) && sub.len() < sup.len());
            assert!(sup.len() >= 2);
            assert!(connected_within(&g, sub) && connected_within(&g, sup));
            assert!(comms.iter().any(|c| sup.is_subset_of(c)));
        }
        for (a, bb) in &b.negatives {
            assert!(!a.is_subset_of(bb));
        }
    }

    #[test]
    fn deterministic() {
        let (g, comms) = data();
        assert_eq!(sample_pairs(&g, &comms, 20, 9).unwrap(), sample_pairs(&g, &comms, 20, 9).unwrap());
        assert_ne!(sample_pairs(&g, &comms, 20, 9).unwrap(), sample_pairs(&g, &comms, 20, 10).unwrap());
    }

    #[test]
    fn needs_two_communities() {
        let (g, comms) = data();
        assert!(sample_pairs(&g, &comms[..1], 5, 1).is_err());
    }

    #[test]
    fn impossible_negatives_error() {
        // two identical singleton communities: every negative is a subset
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let c = Community::new(vec![0, 1]).unwrap();
        let single = Community::new(vec![0]).unwrap();
        assert!(sample_pairs(&g, &[single.clone(), single], 3, 1).is_err());
        // a pair exists when communities differ
        let other = Community::new(vec![1]).unwrap();
        assert!(sample_pairs(&g, &[c, other], 3, 1).is_ok());
    }
}
