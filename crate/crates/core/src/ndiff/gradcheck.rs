use std::sync::Arc;

use rand::Rng as _;

use super::fd::{flatten, numeric_grad, rel_err};
use super::*;
use crate::rng;

fn random(rows: usize, cols: usize, r: &mut crate::rng::Rng) -> DenseArray {
    let v = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    DenseArray::from_vec(rows, cols, v).unwrap()
}

fn check(params: &ParamSet, f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let vars = tape.params(params).unwrap();
    let loss = f(&mut tape, &vars).unwrap();
    let analytic = flatten(&tape.backward(loss, params).unwrap());
    let numeric = numeric_grad(params, 1e-5, |p| {
        let mut t = Tape::new();
        let vs = t.params(p).unwrap();
        let l = f(&mut t, &vs).unwrap();
        t.scalar(l)
    });
    rel_err(&analytic, &numeric)
}

fn random_adjacency(n: usize, r: &mut crate::rng::Rng) -> Vec<Vec<usize>> {
    let g = crate::graph::Graph::from_edges(
        n,
        (0..2 * n).map(|_| (r.gen_range(0..n), r.gen_range(0..n))).collect::<Vec<_>>(),
    )
    .unwrap();
    (0..n).map(|u| g.neighbors(u).to_vec()).collect()
}

/// Every primitive's vector-Jacobian product against central differences,
/// 100 seeds, through a network that touches all of them.
#[test]
fn primitives_match_finite_differences() {
    for seed in 0..100 {
        let mut r = rng::rng(seed);
        let n = r.gen_range(2..6);
        let adj = random_adjacency(n, &mut r);
        let gcn = Arc::new(Aggregation::gcn(&adj));
        let gin = Arc::new(Aggregation::gin(&adj));
        let mut p = ParamSet::default();
        p.push("x", random(n, 3, &mut r));
        p.push("w1", random(3, 4, &mut r));
        p.push("b1", random(1, 4, &mut r));
        p.push("w2", random(4, 4, &mut r));
        p.push("w3", random(8, 2, &mut r));
        p.push("other", random(n, 2, &mut r));
        let mask_val = random(n, 2, &mut r);
        let pick_mask: Vec<bool> = (0..n).map(|i| i == 0 || r.gen_bool(0.6)).collect();
        let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();

        let err = check(&p, |t, v| {
            let h0 = t.linear(v[0], v[1], Some(v[2]))?;
            let h1 = t.gcn_layer(h0, &gcn, v[3])?;
            let h2 = t.gin_layer(h1, &gin, v[3])?;
            let cat = t.concat_cols(&[h1, h2])?;
            let z = t.matmul(cat, v[4])?;
            let m = t.constant(mask_val.clone())?;
            let z = t.mul(z, m)?;
            let z = t.sub(z, v[5])?;
            let z = t.add(z, v[5])?;
            let z = t.add(z, v[5])?;
            let stacked = t.concat_rows(&[z, v[5]])?;
            let z = t.gather_rows(stacked, &(0..n).map(|i| 2 * i % (2 * n)).collect::<Vec<_>>())?;
            let g = t.gather_rows(z, &idx)?;
            let pooled = t.sum_rows(g)?;
            let a = t.square_sum(pooled)?;
            let b = t.sum(z)?;
            let b = t.scale(b, 0.7)?;
            let b = t.add_scalar(b, 1.3)?;
            let logits = t.gather_rows(z, &(0..n).collect::<Vec<_>>())?;
            let col = t_col(t)?;
            let w = t.matmul(logits, col)?;
            let lp = t.log_softmax_pick(w, &pick_mask, 0)?;
            let rl = t.relu(b)?;
            t.add_n(&[a, rl, lp])
        });
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

fn t_col(t: &mut Tape) -> Result<Var> {
    t.constant(DenseArray::from_rows(&[vec![0.6], vec![-0.4]]).unwrap())
}

#[test]
fn linear_examples() {
    let mut t = Tape::new();
    let x = t.constant(DenseArray::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
    let id = t.constant(DenseArray::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    let y = t.linear(x, id, None).unwrap();
    assert_eq!(t.value(y).values(), &[1.0, 2.0]);

    let x = t.constant(DenseArray::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    let w = t.constant(DenseArray::from_rows(&[vec![3.0], vec![4.0]]).unwrap()).unwrap();
    let y = t.linear(x, w, None).unwrap();
    assert_eq!(t.value(y).values(), &[3.0, 4.0]);

    let bad = t.constant(DenseArray::zeros(3, 1)).unwrap();
    assert!(matches!(t.linear(x, bad, None), Err(crate::Error::Shape { .. })));
}

#[test]
fn linear_weight_gradient_is_xt_ones() {
    let mut p = ParamSet::default();
    p.push("w", DenseArray::from_rows(&[vec![0.3, -0.1], vec![0.7, 2.0], vec![1.0, 1.0]]).unwrap());
    let x = DenseArray::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 4.0]]).unwrap();
    let mut t = Tape::new();
    let w = t.param(&p, 0).unwrap();
    let xv = t.constant(x.clone()).unwrap();
    let y = t.matmul(xv, w).unwrap();
    let l = t.sum(y).unwrap();
    let g = t.backward(l, &p).unwrap();
    let ones = DenseArray::from_vec(2, 2, vec![1.0; 4]).unwrap();
    assert_eq!(g[0], x.t_matmul(&ones));
}

#[test]
fn gcn_examples() {
    let mut t = Tape::new();
    let one = Arc::new(Aggregation::gcn(&[vec![]]));
    let h = t.constant(DenseArray::scalar(2.0)).unwrap();
    let w = t.constant(DenseArray::scalar(1.0)).unwrap();
    let y = t.gcn_layer(h, &one, w).unwrap();
    assert_eq!(t.value(y).values(), &[2.0]);

    let pair = Arc::new(Aggregation::gcn(&[vec![1], vec![0]]));
    let h = t.constant(DenseArray::from_rows(&[vec![1.0], vec![1.0]]).unwrap()).unwrap();
    let y = t.gcn_layer(h, &pair, w).unwrap();
    for v in t.value(y).values() {
        assert!((v - 1.0).abs() < 1e-15);
    }

    let neg = t.constant(DenseArray::scalar(-1.0)).unwrap();
    let y = t.gcn_layer(neg, &one, w).unwrap();
    assert_eq!(t.value(y).values(), &[0.0]);

    let wide = t.constant(DenseArray::zeros(3, 3)).unwrap();
    assert!(t.gcn_layer(wide, &pair, w).is_err());
}

#[test]
fn gin_examples() {
    let mut t = Tape::new();
    let one = Arc::new(Aggregation::gin(&[vec![]]));
    let h = t.constant(DenseArray::scalar(1.0)).unwrap();
    let w = t.constant(DenseArray::scalar(2.0)).unwrap();
    let y = t.gin_layer(h, &one, w).unwrap();
    assert_eq!(t.value(y).values(), &[2.0]);

    let pair = Arc::new(Aggregation::gin(&[vec![1], vec![0]]));
    let h = t.constant(DenseArray::from_rows(&[vec![1.0], vec![3.0]]).unwrap()).unwrap();
    let w1 = t.constant(DenseArray::scalar(1.0)).unwrap();
    let y = t.gin_layer(h, &pair, w1).unwrap();
    assert_eq!(t.value(y).values(), &[4.0, 4.0]);

    let z = t.constant(DenseArray::zeros(2, 3)).unwrap();
    let wz = t.constant(DenseArray::from_vec(3, 2, vec![0.5; 6]).unwrap()).unwrap();
    let y = t.gin_layer(z, &pair, wz).unwrap();
    assert!(t.value(y).values().iter().all(|&v| v == 0.0));
}

#[test]
fn backward_examples() {
    let mut p = ParamSet::default();
    p.push("w", DenseArray::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    p.push("unused", DenseArray::from_rows(&[vec![5.0]]).unwrap());
    let mut t = Tape::new();
    let v = t.params(&p).unwrap();
    let l = t.sum(v[0]).unwrap();
    let g = t.backward(l, &p).unwrap();
    assert_eq!(g[0].values(), &[1.0; 4]);
    assert_eq!(g[1].values(), &[0.0]);

    let sq = t.square_sum(v[0]).unwrap();
    let zero = t.scale(sq, 0.0).unwrap();
    let g = t.backward(zero, &p).unwrap();
    assert!(g.iter().all(|a| a.values().iter().all(|&x| x == 0.0)));

    assert!(matches!(t.backward(v[0], &p), Err(crate::Error::Shape { .. })));
}

#[test]
fn non_finite_is_an_error() {
    let mut t = Tape::new();
    let big = t.constant(DenseArray::scalar(1e200)).unwrap();
    let sq = t.mul(big, big);
    assert!(matches!(sq, Err(crate::Error::NonFinite(_))));
    assert!(t.constant(DenseArray::scalar(f64::NAN)).is_err());
}

#[test]
fn log_softmax_pick_matches_softmax() {
    let mut t = Tape::new();
    let l = t.constant(DenseArray::from_rows(&[vec![0.3, -1.0, 2.0]]).unwrap()).unwrap();
    let mask = [true, false, true];
    let lp = t.log_softmax_pick(l, &mask, 2).unwrap();
    let p = masked_softmax(&[0.3, -1.0, 2.0], &mask).unwrap();
    assert!((t.scalar(lp) - p[2].ln()).abs() < 1e-12);
    assert!(t.log_softmax_pick(l, &mask, 1).is_err());
}
