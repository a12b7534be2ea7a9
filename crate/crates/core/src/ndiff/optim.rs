use super::{DenseArray, ParamSet};
use crate::error::{Error, Result};

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<DenseArray>,
    v: Vec<DenseArray>,
}

impl OptimState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || {
            params
                .arrays()
                .iter()
                .map(|a| DenseArray::zeros(a.rows(), a.cols()))
                .collect()
        };
        OptimState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut ParamSet, grads: &[DenseArray], state: &mut OptimState) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape {
            op: "adam_step",
            lhs: (params.len(), 0),
            rhs: (grads.len(), state.m.len()),
        });
    }
    for (p, g) in params.arrays().iter().zip(grads) {
        p.check_same(g, "adam_step")?;
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (i, g) in grads.iter().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let p = params.get_mut(i);
        for (((pv, &gv), mv), vv) in p
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *mv = state.beta1 * *mv + (1.0 - state.beta1) * gv;
            *vv = state.beta2 * *vv + (1.0 - state.beta2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("adam_step"));
        }
    }
    Ok(())
}
