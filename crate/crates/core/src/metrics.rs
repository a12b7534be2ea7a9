//! Community-set evaluation: pairwise F1/Jaccard, bi-matching averages,
//! overlapping NMI, and overlap filtering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::Community;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairScore {
    F1,
    Jaccard,
}

impl PairScore {
    pub fn score(self, a: &Community, b: &Community) -> Result<f64> {
        match self {
            PairScore::F1 => f1_pair(a, b),
            PairScore::Jaccard => jaccard_pair(a, b),
        }
    }
}

fn non_empty(a: &Community, b: &Community) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptyCommunity)
    } else {
        Ok(())
    }
}

/// `2|a ∩ b| / (|a| + |b|)`.
pub fn f1_pair(a: &Community, b: &Community) -> Result<f64> {
    non_empty(a, b)?;
    Ok(2.0 * a.intersection_len(b) as f64 / (a.len() + b.len()) as f64)
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard_pair(a: &Community, b: &Community) -> Result<f64> {
    non_empty(a, b)?;
    let inter = a.intersection_len(b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// Best-match table between two covers: `scores[i][j] = δ(preds[i], truths[j])`.
fn score_matrix(preds: &[Community], truths: &[Community], delta: PairScore, exec: &Exec) -> Result<Vec<Vec<f64>>> {
    exec.try_map(preds.len(), |i| {
        truths.iter().map(|t| delta.score(&preds[i], t)).collect::<Result<Vec<_>>>()
    })
}

fn bimatch_from(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let k = m[0].len();
    let forward: f64 = m.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>() / n as f64;
    let backward: f64 = (0..k)
        .map(|j| m.iter().map(|row| row[j]).fold(0.0, f64::max))
        .sum::<f64>()
        / k as f64;
    0.5 * (forward + backward)
}

/// `½ (1/N Σ_i max_j δ(p_i, t_j) + 1/M Σ_j max_i δ(p_i, t_j))`.
pub fn bimatch(preds: &[Community], truths: &[Community], delta: PairScore) -> Result<f64> {
    bimatch_with(preds, truths, delta, &Exec::Sequential)
}

pub fn bimatch_with(preds: &[Community], truths: &[Community], delta: PairScore, exec: &Exec) -> Result<f64> {
    if preds.is_empty() || truths.is_empty() {
        return Err(Error::NoCommunities("bimatch needs non-empty covers".into()));
    }
    Ok(bimatch_from(&score_matrix(preds, truths, delta, exec)?))
}

fn h(w: f64, n: f64) -> f64 {
    if w > 0.0 {
        -w * (w / n).log2()
    } else {
        0.0
    }
}

/// Entropy of membership in a community of `size` nodes out of `n`.
fn h_community(size: usize, n: usize) -> f64 {
    h(size as f64, n as f64) + h((n - size) as f64, n as f64)
}

/// `H(X_k | Y_l)` over the 2×2 membership table, or `None` when the pair
/// fails the no-match guard `h(a) + h(d) ≥ h(b) + h(c)`.
fn conditional(x: &Community, y: &Community, n: usize) -> Option<f64> {
    let nf = n as f64;
    let d = x.intersection_len(y);
    let c = x.len() - d;
    let b = y.len() - d;
    let a = n - (x.len() + y.len() - d);
    let (ha, hb, hc, hd) = (h(a as f64, nf), h(b as f64, nf), h(c as f64, nf), h(d as f64, nf));
    if ha + hd < hb + hc {
        return None;
    }
    Some(ha + hb + hc + hd - h((b + d) as f64, nf) - h((a + c) as f64, nf))
}

/// `Σ_k min_l H(X_k | Y_l)`, each term capped by `H(X_k)`.
fn cover_conditional(x: &[Community], y: &[Community], n: usize) -> f64 {
    x.iter()
        .map(|xk| {
            y.iter()
                .filter_map(|yl| conditional(xk, yl, n))
                .fold(h_community(xk.len(), n), f64::min)
        })
        .sum()
}

/// Overlapping NMI with max normalisation:
/// `I(X:Y) / max(H(X), H(Y))`, `I = ½[H(X) − H(X|Y) + H(Y) − H(Y|X)]`.
/// The node universe is the union of all members of both covers.
pub fn onmi(preds: &[Community], truths: &[Community]) -> Result<f64> {
    if preds.is_empty() || truths.is_empty() {
        return Err(Error::NoCommunities("onmi needs non-empty covers".into()));
    }
    let universe: BTreeSet<usize> = preds
        .iter()
        .chain(truths)
        .flat_map(|c| c.members().iter().copied())
        .collect();
    let n = universe.len();
    let hx: f64 = preds.iter().map(|c| h_community(c.len(), n)).sum();
    let hy: f64 = truths.iter().map(|c| h_community(c.len(), n)).sum();
    let norm = hx.max(hy);
    if norm == 0.0 {
        // Every community spans the whole universe on both sides.
        return Ok(1.0);
    }
    let hx_y = cover_conditional(preds, truths, n);
    let hy_x = cover_conditional(truths, preds, n);
    let mutual = 0.5 * (hx - hx_y + hy - hy_x);
    Ok((mutual / norm).clamp(0.0, 1.0))
}

/// Drops every detected community whose best overlap `|c ∩ r| / |c|` with a
/// reference community exceeds `threshold`.
pub fn filter_overlap(detected: &[Community], reference: &[Community], threshold: f64) -> Result<Vec<Community>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("overlap threshold {threshold} not in [0, 1]")));
    }
    Ok(detected
        .iter()
        .filter(|c| {
            reference
                .iter()
                .all(|r| c.intersection_len(r) as f64 / c.len() as f64 <= threshold)
        })
        .cloned()
        .collect())
}

/// One prediction's best match among the truths.
#[derive(Clone, Debug, PartialEq)]
pub struct BestMatch {
    pub truth: usize,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub f1: f64,
    pub jaccard: f64,
    pub onmi: f64,
    pub best_matches: Vec<BestMatch>,
}

impl ScoreReport {
    pub fn compute(preds: &[Community], truths: &[Community], exec: &Exec) -> Result<Self> {
        if preds.is_empty() || truths.is_empty() {
            return Err(Error::NoCommunities("cannot score empty covers".into()));
        }
        let f1m = score_matrix(preds, truths, PairScore::F1, exec)?;
        let jm = score_matrix(preds, truths, PairScore::Jaccard, exec)?;
        let best_matches = f1m
            .iter()
            .map(|row| {
                let (truth, &f1) = row
                    .iter()
                    .enumerate()
                    .fold((0, &row[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
                BestMatch { truth, f1 }
            })
            .collect();
        Ok(ScoreReport {
            f1: bimatch_from(&f1m),
            jaccard: bimatch_from(&jm),
            onmi: onmi(preds, truths)?,
            best_matches,
        })
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!("f1: {:.6}\njaccard: {:.6}\nonmi: {:.6}\n", self.f1, self.jaccard, self.onmi)
    }

    /// `metric<TAB>value` rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [("f1", self.f1), ("jaccard", self.jaccard), ("onmi", self.onmi)] {
            let _ = writeln!(s, "{k}\t{v:.6}");
        }
        s
    }

    /// `prediction<TAB>best_truth<TAB>f1` rows.
    pub fn best_match_tsv(&self) -> String {
        let mut s = String::new();
        for (i, m) in self.best_matches.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{}\t{:.6}", m.truth, m.f1);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: &[usize]) -> Community {
        Community::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pair_examples() {
        let a = c(&[1, 2, 3]);
        let b = c(&[2, 3, 4]);
        assert_eq!(f1_pair(&a, &a).unwrap(), 1.0);
        assert_eq!(f1_pair(&a, &c(&[7, 8])).unwrap(), 0.0);
        assert!((f1_pair(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard_pair(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard_pair(&a, &c(&[7])).unwrap(), 0.0);
        assert_eq!(jaccard_pair(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn bimatch_examples() {
        let x = vec![c(&[1, 2]), c(&[3, 4, 5])];
        let rev: Vec<_> = x.iter().rev().cloned().collect();
        assert_eq!(bimatch(&x, &rev, PairScore::F1).unwrap(), 1.0);
        let v = bimatch(&[c(&[1, 2, 3])], &[c(&[2, 3, 4])], PairScore::F1).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(bimatch(&[], &x, PairScore::F1).is_err());
    }

    #[test]
    fn onmi_examples() {
        let x = vec![c(&[0, 1, 2]), c(&[2, 3, 4, 5]), c(&[6, 7])];
        assert!((onmi(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let singles: Vec<_> = (0..8).map(|i| c(&[i])).collect();
        let whole = vec![c(&(0..8).collect::<Vec<_>>())];
        let v = onmi(&singles, &whole).unwrap();
        assert!((0.0..0.5).contains(&v), "{v}");
        let rev: Vec<_> = x.iter().rev().cloned().collect();
        let y = vec![c(&[0, 1]), c(&[3, 4, 5, 6])];
        assert!((onmi(&x, &y).unwrap() - onmi(&rev, &y).unwrap()).abs() < 1e-15);
        assert!(onmi(&x, &[]).is_err());
    }

    #[test]
    fn filter_examples() {
        let refs = vec![c(&[1, 2, 3, 4])];
        let det = vec![c(&[1, 2]), c(&[8, 9]), c(&[1, 8, 9])];
        assert_eq!(filter_overlap(&det, &refs, 1.0).unwrap(), det);
        assert_eq!(filter_overlap(&det, &refs, 0.5).unwrap(), vec![c(&[8, 9]), c(&[1, 8, 9])]);
        assert!(filter_overlap(&det, &refs, 1.5).is_err());
    }

    #[test]
    fn report_formats() {
        let x = vec![c(&[1, 2]), c(&[3, 4])];
        let r = ScoreReport::compute(&x, &x, &Exec::Sequential).unwrap();
        assert_eq!(r.to_tsv(), "f1\t1.000000\njaccard\t1.000000\nonmi\t1.000000\n");
        assert!(r.to_text().starts_with("f1: 1.000000"));
        assert_eq!(r.best_matches[1], BestMatch { truth: 1, f1: 1.0 });
    }

    fn arb_cover() -> impl Strategy<Value = Vec<Community>> {
        proptest::collection::vec(
            proptest::collection::btree_set(0usize..20, 1..8)
                .prop_map(|s| Community::new(s.into_iter().collect()).unwrap()),
            1..10,
        )
    }

    proptest! {
        #[test]
        fn pair_scores_symmetric(x in arb_cover()) {
            for a in &x {
                for b in &x {
                    prop_assert_eq!(f1_pair(a, b).unwrap(), f1_pair(b, a).unwrap());
                    prop_assert_eq!(jaccard_pair(a, b).unwrap(), jaccard_pair(b, a).unwrap());
                }
            }
        }

        #[test]
        fn self_scores_are_one(x in arb_cover()) {
            prop_assert!((bimatch(&x, &x, PairScore::F1).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((onmi(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn perfect_match_never_hurts(x in arb_cover(), y in arb_cover(), pick in 0usize..10) {
            let t = &y[pick % y.len()];
            let before = bimatch(&x, &y, PairScore::F1).unwrap();
            let mut more = x.clone();
            more.push(t.clone());
            let after = bimatch(&more, &y, PairScore::F1).unwrap();
            // the added prediction scores 1 in the forward average
            prop_assert!(after + 1e-12 >= before);
        }

        #[test]
        fn onmi_in_unit_interval(x in arb_cover(), y in arb_cover()) {
            let v = onmi(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - onmi(&y, &x).unwrap()).abs() < 1e-12);
        }
    }
}
