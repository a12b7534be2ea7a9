use std::cmp::Ordering;

use super::encoder::{encode_community, EncodeMode, EncoderParams};
use super::loss::order_penalty;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{capped_ego_net, Community, Graph};

/// Embeddings of every node's (capped) k-ego net, indexed by center node.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateTable {
    pub k: usize,
    pub size_cap: usize,
    pub embeddings: Vec<Vec<f64>>,
}

/// Encodes the capped k-ego net of every node in inference mode.
pub fn encode_all_candidates(
    graph: &Graph,
    params: &EncoderParams,
    k: usize,
    size_cap: usize,
    exec: &Exec,
) -> Result<CandidateTable> {
    let embeddings = exec.try_map(graph.node_count(), |u| {
        let ego = capped_ego_net(graph, u, k, size_cap)?;
        encode_community(graph, &ego, params, EncodeMode::Inference)
    })?;
    Ok(CandidateTable { k, size_cap, embeddings })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchMetric {
    /// Euclidean distance in embedding space.
    #[default]
    Euclidean,
    /// Order penalty `E(candidate, pattern)`: how far the candidate sits
    /// outside the pattern's lower-left region.
    OrderPenalty,
}

impl MatchMetric {
    pub fn distance(self, pattern: &[f64], candidate: &[f64]) -> f64 {
        match self {
            MatchMetric::Euclidean => pattern
                .iter()
                .zip(candidate)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
            MatchMetric::OrderPenalty => order_penalty(candidate, pattern).expect("equal dims"),
        }
    }
}

/// A located candidate: the ego net centred at `center`, matched to
/// training pattern `pattern` at `distance`.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub pattern: usize,
    pub center: usize,
    pub distance: f64,
}

fn by_distance_then_id(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Splits `total` outputs across `patterns`: `ceil(total/m)` for the first
/// `total mod m` patterns, `floor(total/m)` for the rest.
pub fn per_pattern_counts(total: usize, patterns: usize) -> Vec<usize> {
    if patterns == 0 {
        return Vec::new();
    }
    let (q, r) = (total / patterns, total % patterns);
    (0..patterns).map(|i| q + usize::from(i < r)).collect()
}

fn check_dims(patterns: &[Vec<f64>], table: &CandidateTable) -> Result<()> {
    let d = patterns.first().map_or(0, Vec::len);
    for e in patterns.iter().chain(&table.embeddings) {
        if e.len() != d {
            return Err(Error::Shape {
                op: "match",
                lhs: (1, d),
                rhs: (1, e.len()),
            });
        }
    }
    Ok(())
}

/// For each pattern in order, takes its `counts[i]` nearest candidates
/// (ties by smaller center id), skipping candidates already claimed by an
/// earlier pattern.
pub fn match_candidates(
    patterns: &[Vec<f64>],
    table: &CandidateTable,
    counts: &[usize],
    metric: MatchMetric,
    exec: &Exec,
) -> Result<Vec<Match>> {
    if counts.len() != patterns.len() {
        return Err(Error::invalid("one count per pattern required"));
    }
    if counts.iter().sum::<usize>() == 0 {
        return Err(Error::invalid("n_per_pattern must be at least 1"));
    }
    let total: usize = counts.iter().sum();
    if total > table.embeddings.len() {
        return Err(Error::invalid(format!(
            "{total} communities requested from {} candidates",
            table.embeddings.len()
        )));
    }
    check_dims(patterns, table)?;
    let ranked: Vec<Vec<(f64, usize)>> = exec.map(patterns.len(), |i| {
        let mut d: Vec<(f64, usize)> = table
            .embeddings
            .iter()
            .enumerate()
            .map(|(u, e)| (metric.distance(&patterns[i], e), u))
            .collect();
        d.sort_unstable_by(by_distance_then_id);
        d
    });
    let mut claimed = vec![false; table.embeddings.len()];
    let mut out = Vec::with_capacity(total);
    for (pattern, (order, &want)) in ranked.iter().zip(counts).enumerate() {
        let picks = order.iter().filter(|(_, u)| !claimed[*u]).take(want).copied().collect::<Vec<_>>();
        for (distance, center) in picks {
            claimed[center] = true;
            out.push(Match {
                pattern,
                center,
                distance,
            });
        }
    }
    Ok(out)
}

/// Every candidate whose distance to its closest pattern is at most `eta`,
/// ascending by that distance (ties by center id).
pub fn match_threshold(patterns: &[Vec<f64>], table: &CandidateTable, eta: f64, metric: MatchMetric, exec: &Exec) -> Result<Vec<Match>> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::invalid(format!("threshold {eta} must be non-negative")));
    }
    if patterns.is_empty() {
        return Err(Error::NoCommunities("no patterns to match".into()));
    }
    check_dims(patterns, table)?;
    let best: Vec<Match> = exec.map(table.embeddings.len(), |u| {
        let (pattern, distance) = patterns
            .iter()
            .map(|p| metric.distance(p, &table.embeddings[u]))
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
        Match {
            pattern,
            center: u,
            distance,
        }
    });
    let mut out: Vec<Match> = best.into_iter().filter(|m| m.distance <= eta).collect();
    out.sort_by(|a, b| by_distance_then_id(&(a.distance, a.center), &(b.distance, b.center)));
    Ok(out)
}

/// The capped ego nets behind a list of matches.
pub fn located_communities(graph: &Graph, matches: &[Match], k: usize, size_cap: usize) -> Result<Vec<Community>> {
    matches
        .iter()
        .map(|m| capped_ego_net(graph, m.center, k, size_cap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn table(e: Vec<Vec<f64>>) -> CandidateTable {
        CandidateTable {
            k: 1,
            size_cap: 10,
            embeddings: e,
        }
    }

    #[test]
    fn nearest_point_wins() {
        let mut e = vec![vec![100.0, 100.0]; 10];
        e[5] = vec![0.1, 0.0];
        e[9] = vec![5.0, 5.0];
        let m = match_candidates(&[vec![0.0, 0.0]], &table(e), &[1], MatchMetric::Euclidean, &Exec::Sequential).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].center, 5);
    }

    #[test]
    fn ties_go_to_smaller_id_and_dedup() {
        let e = vec![vec![1.0], vec![-1.0], vec![1.0], vec![3.0]];
        let pats = vec![vec![0.0], vec![0.0]];
        let m = match_candidates(&pats, &table(e), &[1, 2], MatchMetric::Euclidean, &Exec::Sequential).unwrap();
        let centers: Vec<_> = m.iter().map(|x| (x.pattern, x.center)).collect();
        assert_eq!(centers, vec![(0, 0), (1, 1), (1, 2)]);
    }

    #[test]
    fn too_many_requested() {
        let e = vec![vec![1.0]; 3];
        assert!(match_candidates(&[vec![0.0]], &table(e), &[4], MatchMetric::Euclidean, &Exec::Sequential).is_err());
    }

    #[test]
    fn counts_split() {
        assert_eq!(per_pattern_counts(10, 3), vec![4, 3, 3]);
        assert_eq!(per_pattern_counts(9, 3), vec![3, 3, 3]);
        assert_eq!(per_pattern_counts(2, 3), vec![1, 1, 0]);
    }

    #[test]
    fn threshold_examples() {
        let e = vec![vec![1.0], vec![0.5], vec![2.0]];
        let p = vec![vec![0.0]];
        assert!(match_threshold(&p, &table(e.clone()), 0.0, MatchMetric::Euclidean, &Exec::Sequential)
            .unwrap()
            .is_empty());
        let all = match_threshold(&p, &table(e.clone()), f64::INFINITY, MatchMetric::Euclidean, &Exec::Sequential).unwrap();
        assert_eq!(all.iter().map(|m| m.center).collect::<Vec<_>>(), vec![1, 0, 2]);
        let some = match_threshold(&p, &table(e), 1.0, MatchMetric::Euclidean, &Exec::Sequential).unwrap();
        assert!(some.iter().all(|m| m.distance <= 1.0));
        assert_eq!(some.len(), 2);
    }

    /// Repeated linear scans over unclaimed candidates.
    fn scan_oracle(patterns: &[Vec<f64>], e: &[Vec<f64>], counts: &[usize]) -> Vec<(usize, usize)> {
        let mut claimed = vec![false; e.len()];
        let mut out = vec![];
        for (p, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let mut best: Option<(f64, usize)> = None;
                for (u, x) in e.iter().enumerate() {
                    if claimed[u] {
                        continue;
                    }
                    let d = MatchMetric::Euclidean.distance(&patterns[p], x);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, u));
                    }
                }
                let (_, u) = best.unwrap();
                claimed[u] = true;
                out.push((p, u));
            }
        }
        out
    }

    #[test]
    fn equals_linear_scan() {
        for seed in 0..10 {
            let mut r = rng::rng(seed);
            // coarse grid values so exact ties occur
            let e: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| f64::from(r.gen_range(0..4))).collect()).collect();
            let pats: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| f64::from(r.gen_range(0..4))).collect()).collect();
            let counts = per_pattern_counts(23, 5);
            let got = match_candidates(&pats, &table(e.clone()), &counts, MatchMetric::Euclidean, &Exec::parallel()).unwrap();
            let got: Vec<_> = got.iter().map(|m| (m.pattern, m.center)).collect();
            assert_eq!(got, scan_oracle(&pats, &e, &counts));
        }
    }
}
