//! Minimal dense reverse-mode autodiff: enough for GCN/GIN encoders, small
//! MLP heads, masked softmax policies, and Adam.

mod array;
mod checkpoint;
mod optim;
mod tape;

pub use array::DenseArray;
pub use checkpoint::{read_checkpoint, write_checkpoint, ParamSet};
pub use optim::{adam_step, OptimState};
pub use tape::{Aggregation, Tape, Var};

use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;

/// Softmax over the masked-in entries; masked-out entries are exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape {
            op: "masked_softmax",
            lhs: (1, logits.len()),
            rhs: (1, mask.len()),
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid("masked_softmax needs at least one unmasked entry"));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    if out.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("masked_softmax"));
    }
    Ok(out)
}

/// Inverted-dropout keep mask: entries are 0 with probability `rate`,
/// `1 / (1 - rate)` otherwise.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Result<DenseArray> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} not in [0, 1)")));
    }
    let scale = 1.0 / (1.0 - rate);
    let values = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
        .collect();
    DenseArray::from_vec(rows, cols, values)
}

/// Element-wise sum of per-example gradients, accumulated in iteration order.
pub fn sum_gradients<I>(set: &ParamSet, grads: I) -> Vec<DenseArray>
where
    I: IntoIterator<Item = Vec<DenseArray>>,
{
    let mut total: Vec<DenseArray> = set.arrays().iter().map(|a| DenseArray::zeros(a.rows(), a.cols())).collect();
    for g in grads {
        for (acc, gi) in total.iter_mut().zip(&g) {
            for (x, y) in acc.values_mut().iter_mut().zip(gi.values()) {
                *x += y;
            }
        }
    }
    total
}

/// Glorot-uniform initialisation, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseArray {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    DenseArray::from_vec(rows, cols, values).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn softmax_examples() {
        assert_eq!(masked_softmax(&[0.0, 0.0], &[true, true]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(masked_softmax(&[5.0, 0.0], &[true, false]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            masked_softmax(&[1.0, 1.0, 1.0], &[true, false, true]).unwrap(),
            vec![0.5, 0.0, 0.5]
        );
        assert!(masked_softmax(&[1.0], &[false]).is_err());
        let p = masked_softmax(&[900.0, -3.0, 12.5, 0.1], &[true, true, false, true]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn dropout_expectation() {
        let mut r = rng::rng(5);
        let m = dropout_mask(100, 100, 0.2, &mut r).unwrap();
        let mean = m.values().iter().sum::<f64>() / 1e4;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(m.values().iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-15));
        let zero = dropout_mask(3, 3, 0.0, &mut r).unwrap();
        assert!(zero.values().iter().all(|&v| v == 1.0));
        assert!(dropout_mask(1, 1, 1.0, &mut r).is_err());
    }
}

#[cfg(test)]
pub(crate) mod fd;
#[cfg(test)]
mod gradcheck;
