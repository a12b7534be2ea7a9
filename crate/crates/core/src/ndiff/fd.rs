//! Central finite differences over a whole parameter set (test oracle).

use super::{DenseArray, ParamSet};

pub(crate) fn numeric_grad(params: &ParamSet, step: f64, mut f: impl FnMut(&ParamSet) -> f64) -> Vec<f64> {
    let base = params.flatten();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut x = base.clone();
    for i in 0..base.len() {
        x[i] = base[i] + step;
        probe.assign_flat(&x).unwrap();
        let up = f(&probe);
        x[i] = base[i] - step;
        probe.assign_flat(&x).unwrap();
        let down = f(&probe);
        x[i] = base[i];
        out.push((up - down) / (2.0 * step));
    }
    out
}

pub(crate) fn flatten(grads: &[DenseArray]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.values().iter().copied()).collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub(crate) fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
