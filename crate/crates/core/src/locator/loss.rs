use crate::error::{Error, Result};
use crate::ndiff::{Tape, Var};

/// `E(a, b) = ‖max(0, a − b)‖²`: zero exactly when `a ≤ b` elementwise.
pub fn order_penalty(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "order_penalty",
            lhs: (1, a.len()),
            rhs: (1, b.len()),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).max(0.0).powi(2)).sum())
}

pub fn order_penalty_on_tape(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let d = tape.sub(a, b)?;
    let r = tape.relu(d)?;
    tape.square_sum(r)
}

/// One pair's contribution: `E` for a positive pair, `max(0, α − E)` for a
/// negative one.
pub fn pair_loss(tape: &mut Tape, a: Var, b: Var, positive: bool, alpha: f64) -> Result<Var> {
    let e = order_penalty_on_tape(tape, a, b)?;
    if positive {
        Ok(e)
    } else {
        let neg = tape.scale(e, -1.0)?;
        let shifted = tape.add_scalar(neg, alpha)?;
        tape.relu(shifted)
    }
}

/// `Σ_pos E + Σ_neg max(0, α − E)` over embedded pairs.
pub fn margin_loss(tape: &mut Tape, positives: &[(Var, Var)], negatives: &[(Var, Var)], alpha: f64) -> Result<Var> {
    check_alpha(alpha)?;
    if positives.is_empty() && negatives.is_empty() {
        return Err(Error::invalid("margin loss over an empty batch"));
    }
    let mut terms = Vec::with_capacity(positives.len() + negatives.len());
    for &(a, b) in positives {
        terms.push(pair_loss(tape, a, b, true, alpha)?);
    }
    for &(a, b) in negatives {
        terms.push(pair_loss(tape, a, b, false, alpha)?);
    }
    tape.add_n(&terms)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("margin {alpha} must be positive")))
    }
}

/// Plain-value margin loss.
pub fn margin_loss_value(positives: &[(&[f64], &[f64])], negatives: &[(&[f64], &[f64])], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if positives.is_empty() && negatives.is_empty() {
        return Err(Error::invalid("margin loss over an empty batch"));
    }
    let mut total = 0.0;
    for (a, b) in positives {
        total += order_penalty(a, b)?;
    }
    for (a, b) in negatives {
        total += (alpha - order_penalty(a, b)?).max(0.0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndiff::DenseArray;
    use proptest::prelude::*;

    #[test]
    fn penalty_examples() {
        assert_eq!(order_penalty(&[0.5, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(order_penalty(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(order_penalty(&[0.0, 1.0], &[0.5, 1.0]).unwrap(), 0.0);
        assert!(order_penalty(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn margin_examples() {
        let z = [0.0, 0.0];
        assert_eq!(margin_loss_value(&[(&z, &z)], &[], 0.4).unwrap(), 0.0);
        assert_eq!(margin_loss_value(&[], &[(&z, &z)], 0.4).unwrap(), 0.4);
        let far = [3.0, 0.0];
        assert_eq!(margin_loss_value(&[], &[(&far, &z)], 0.4).unwrap(), 0.0);
        assert!(margin_loss_value(&[], &[], 0.4).is_err());
        assert!(margin_loss_value(&[(&z, &z)], &[], 0.0).is_err());
    }

    #[test]
    fn tape_and_plain_agree() {
        let a = [0.9, -0.2, 0.4];
        let b = [0.1, 0.3, 0.5];
        let mut t = Tape::new();
        let va = t.constant(DenseArray::from_vec(1, 3, a.to_vec()).unwrap()).unwrap();
        let vb = t.constant(DenseArray::from_vec(1, 3, b.to_vec()).unwrap()).unwrap();
        let l = margin_loss(&mut t, &[(va, vb)], &[(vb, va), (va, vb)], 0.4).unwrap();
        let plain = margin_loss_value(&[(&a, &b)], &[(&b, &a), (&a, &b)], 0.4).unwrap();
        assert!((t.scalar(l) - plain).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn order_direction_consistent(a in proptest::collection::vec(-5.0f64..5.0, 4), d in proptest::collection::vec(0.0f64..2.0, 4)) {
            let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
            prop_assert_eq!(order_penalty(&a, &b).unwrap(), 0.0);
            let rev = order_penalty(&b, &a).unwrap();
            if d.iter().any(|&v| v > 0.0) {
                prop_assert!(rev > 0.0);
            } else {
                prop_assert_eq!(rev, 0.0);
            }
        }

        #[test]
        fn margin_nonnegative_and_zero_iff(
            pos in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), proptest::collection::vec(-2.0f64..2.0, 3)), 0..4),
            neg in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), proptest::collection::vec(-2.0f64..2.0, 3)), 1..4),
        ) {
            let p: Vec<(&[f64], &[f64])> = pos.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
            let n: Vec<(&[f64], &[f64])> = neg.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
            let l = margin_loss_value(&p, &n, 0.4).unwrap();
            prop_assert!(l >= 0.0);
            let zero = p.iter().all(|(a, b)| order_penalty(a, b).unwrap() == 0.0)
                && n.iter().all(|(a, b)| order_penalty(a, b).unwrap() >= 0.4);
            prop_assert_eq!(l == 0.0, zero);
        }
    }
}
