use std::sync::Arc;

use super::{masked_softmax, DenseArray, ParamSet};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Fixed sparse linear operator over rows: `out[u] = Σ w · in[v]` for
/// `(v, w)` in `rows[u]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Aggregation {
    /// Symmetric-normalised adjacency with self-loops,
    /// `Â_uv = 1 / sqrt((deg u + 1)(deg v + 1))`.
    pub fn gcn(adjacency: &[Vec<usize>]) -> Self {
        let norm: Vec<f64> = adjacency
            .iter()
            .map(|n| 1.0 / ((n.len() + 1) as f64).sqrt())
            .collect();
        let rows = adjacency
            .iter()
            .enumerate()
            .map(|(u, nbrs)| {
                std::iter::once((u, norm[u] * norm[u]))
                    .chain(nbrs.iter().map(|&v| (v, norm[u] * norm[v])))
                    .collect()
            })
            .collect();
        Aggregation { rows }
    }

    /// GIN sum aggregation with a fixed self weight of `1 + 0`.
    pub fn gin(adjacency: &[Vec<usize>]) -> Self {
        let rows = adjacency
            .iter()
            .enumerate()
            .map(|(u, nbrs)| {
                std::iter::once((u, 1.0))
                    .chain(nbrs.iter().map(|&v| (v, 1.0)))
                    .collect()
            })
            .collect();
        Aggregation { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, input: &DenseArray) -> Result<DenseArray> {
        if input.rows() != self.rows.len() {
            return Err(Error::Shape {
                op: "aggregate",
                lhs: (self.rows.len(), self.rows.len()),
                rhs: input.shape(),
            });
        }
        let mut out = DenseArray::zeros(input.rows(), input.cols());
        for (u, row) in self.rows.iter().enumerate() {
            let dst = out.row_mut(u);
            for &(v, w) in row {
                for (d, &x) in dst.iter_mut().zip(input.row(v)) {
                    *d += w * x;
                }
            }
        }
        Ok(out)
    }

    fn adjoint(&self, grad: &DenseArray) -> DenseArray {
        let mut out = DenseArray::zeros(grad.rows(), grad.cols());
        for (u, row) in self.rows.iter().enumerate() {
            let g = grad.row(u).to_vec();
            for &(v, w) in row {
                for (d, &x) in out.row_mut(v).iter_mut().zip(&g) {
                    *d += w * x;
                }
            }
        }
        out
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Aggregate(Var, Arc<Aggregation>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SumRows(Var),
    Sum(Var),
    SquareSum(Var),
    AddN(Vec<Var>),
    LogSoftmaxPick {
        logits: Var,
        index: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: DenseArray,
    op: Op,
}

/// Append-only record of primitive applications. Backward visits the
/// records in exact reverse order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseArray {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).values()[0]
    }

    fn push(&mut self, value: DenseArray, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant.
    pub fn constant(&mut self, value: DenseArray) -> Result<Var> {
        self.push(value, Op::Leaf, "constant")
    }

    /// Records parameter `index` of `set`.
    pub fn param(&mut self, set: &ParamSet, index: usize) -> Result<Var> {
        self.push(set.get(index).clone(), Op::Param(index), "param")
    }

    /// Records every parameter of `set`, in order.
    pub fn params(&mut self, set: &ParamSet) -> Result<Vec<Var>> {
        (0..set.len()).map(|i| self.param(set, i)).collect()
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let v = self.value(x).matmul(self.value(w))?;
        self.push(v, Op::MatMul(x, w), "matmul")
    }

    /// `x · w (+ bias)` with `bias` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match bias {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape {
                op: "add_row",
                lhs: xv.shape(),
                rhs: bv.shape(),
            });
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(bv.values()) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, bias), "add_row")
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same(bv, name)?;
        let values = av.values().iter().zip(bv.values()).map(|(&x, &y)| f(x, y)).collect();
        let out = DenseArray::from_vec(av.rows(), av.cols(), values)?;
        self.push(out, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|v| v.max(0.0));
        self.push(v, Op::Relu(x), "relu")
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let v = self.value(x).map(|v| v * c);
        self.push(v, Op::Scale(x, c), "scale")
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let v = self.value(x).map(|v| v + c);
        self.push(v, Op::AddScalar(x), "add_scalar")
    }

    pub fn aggregate(&mut self, x: Var, agg: &Arc<Aggregation>) -> Result<Var> {
        let v = agg.apply(self.value(x))?;
        self.push(v, Op::Aggregate(x, Arc::clone(agg)), "aggregate")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, cols),
                    rhs: v.shape(),
                });
            }
            cols += v.cols();
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                values.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = DenseArray::from_vec(rows, cols, values)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.value(p).cols());
        let mut values = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: (rows, cols),
                    rhs: v.shape(),
                });
            }
            rows += v.rows();
            values.extend_from_slice(v.values());
        }
        let out = DenseArray::from_vec(rows, cols, values)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: xv.shape(),
                rhs: (bad, 0),
            });
        }
        let values = idx.iter().flat_map(|&i| xv.row(i).iter().copied()).collect();
        let out = DenseArray::from_vec(idx.len(), xv.cols(), values)?;
        self.push(out, Op::GatherRows(x, idx.to_vec()), "gather_rows")
    }

    /// Column sums as a `1 × cols` row.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let mut out = DenseArray::zeros(1, xv.cols());
        for r in 0..xv.rows() {
            for (o, &v) in out.values_mut().iter_mut().zip(xv.row(r)) {
                *o += v;
            }
        }
        self.push(out, Op::SumRows(x), "sum_rows")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).values().iter().sum();
        self.push(DenseArray::scalar(s), Op::Sum(x), "sum")
    }

    pub fn square_sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).values().iter().map(|v| v * v).sum();
        self.push(DenseArray::scalar(s), Op::SquareSum(x), "square_sum")
    }

    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::invalid("add_n of nothing"));
        };
        let mut out = self.value(first).clone();
        for &x in &xs[1..] {
            let v = self.value(x);
            out.check_same(v, "add_n")?;
            out.add_assign(v);
        }
        self.push(out, Op::AddN(xs.to_vec()), "add_n")
    }

    /// `log softmax(logits)[index]` restricted to the masked-in entries.
    pub fn log_softmax_pick(&mut self, logits: Var, mask: &[bool], index: usize) -> Result<Var> {
        let lv = self.value(logits);
        let probs = masked_softmax(lv.values(), mask)?;
        if index >= mask.len() || !mask[index] {
            return Err(Error::InvalidAction(format!("index {index} is masked out")));
        }
        let max = lv
            .values()
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + lv.values()
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&l, _)| (l - max).exp())
                .sum::<f64>()
                .ln();
        let out = DenseArray::scalar(lv.values()[index] - lse);
        self.push(
            out,
            Op::LogSoftmaxPick {
                logits,
                index,
                probs,
            },
            "log_softmax_pick",
        )
    }

    /// Reverse pass from a scalar `loss`. Returns one gradient per parameter
    /// of `set`; parameters not reached by `loss` get zeros.
    pub fn backward(&self, loss: Var, set: &ParamSet) -> Result<Vec<DenseArray>> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: self.value(loss).shape(),
                rhs: (1, 1),
            });
        }
        let mut grads: Vec<Option<DenseArray>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(DenseArray::scalar(1.0));
        let mut out: Vec<DenseArray> = (0..set.len())
            .map(|i| {
                let (r, c) = set.get(i).shape();
                DenseArray::zeros(r, c)
            })
            .collect();

        fn acc(grads: &mut [Option<DenseArray>], v: Var, g: DenseArray) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Param(i) => {
                    let slot = &mut out[*i];
                    slot.check_same(&g, "backward")?;
                    slot.add_assign(&g);
                }
                Op::MatMul(x, w) => {
                    acc(&mut grads, *x, g.matmul_t(self.value(*w)));
                    acc(&mut grads, *w, self.value(*x).t_matmul(&g));
                }
                Op::AddRow(x, b) => {
                    let mut gb = DenseArray::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in gb.values_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = zip_with(&g, self.value(*b), |x, y| x * y);
                    let gb = zip_with(&g, self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Relu(x) => {
                    let gx = zip_with(&g, &node.value, |gv, y| if y > 0.0 { gv } else { 0.0 });
                    acc(&mut grads, *x, gx);
                }
                Op::Scale(x, c) => acc(&mut grads, *x, g.map(|v| v * c)),
                Op::AddScalar(x) => acc(&mut grads, *x, g),
                Op::Aggregate(x, agg) => acc(&mut grads, *x, agg.adjoint(&g)),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        let mut gp = DenseArray::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.value(p).shape();
                        let slice = g.values()[offset * cols..(offset + rows) * cols].to_vec();
                        offset += rows;
                        acc(&mut grads, p, DenseArray::from_vec(rows, cols, slice)?);
                    }
                }
                Op::GatherRows(x, idx) => {
                    let (rows, cols) = self.value(*x).shape();
                    let mut gx = DenseArray::zeros(rows, cols);
                    for (k, &i) in idx.iter().enumerate() {
                        for (d, &v) in gx.row_mut(i).iter_mut().zip(g.row(k)) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SumRows(x) => {
                    let (rows, cols) = self.value(*x).shape();
                    let mut gx = DenseArray::zeros(rows, cols);
                    for r in 0..rows {
                        gx.row_mut(r).copy_from_slice(g.values());
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let s = g.values()[0];
                    acc(&mut grads, *x, self.value(*x).map(|_| s));
                }
                Op::SquareSum(x) => {
                    let s = g.values()[0];
                    acc(&mut grads, *x, self.value(*x).map(|v| 2.0 * s * v));
                }
                Op::AddN(xs) => {
                    for &x in xs {
                        acc(&mut grads, x, g.clone());
                    }
                }
                Op::LogSoftmaxPick {
                    logits,
                    index,
                    probs,
                } => {
                    let s = g.values()[0];
                    let (r, c) = self.value(*logits).shape();
                    let values = probs
                        .iter()
                        .enumerate()
                        .map(|(j, &p)| s * (f64::from(u8::from(j == *index)) - p))
                        .collect();
                    acc(&mut grads, *logits, DenseArray::from_vec(r, c, values)?);
                }
            }
        }
        if out.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("backward"));
        }
        Ok(out)
    }
}

fn zip_with(a: &DenseArray, b: &DenseArray, f: impl Fn(f64, f64) -> f64) -> DenseArray {
    let values = a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect();
    DenseArray::from_vec(a.rows(), a.cols(), values).expect("same shape")
}

/// Convenience layers built from tape primitives.
impl Tape {
    /// `ReLU(Â · h · w)` with the GCN propagation matrix.
    pub fn gcn_layer(&mut self, h: Var, agg: &Arc<Aggregation>, w: Var) -> Result<Var> {
        let m = self.aggregate(h, agg)?;
        let z = self.matmul(m, w)?;
        self.relu(z)
    }

    /// `ReLU(w · ((1 + 0) h_u + Σ_{v ∈ N(u)} h_v))`.
    pub fn gin_layer(&mut self, h: Var, agg: &Arc<Aggregation>, w: Var) -> Result<Var> {
        let m = self.aggregate(h, agg)?;
        let z = self.matmul(m, w)?;
        self.relu(z)
    }
}
