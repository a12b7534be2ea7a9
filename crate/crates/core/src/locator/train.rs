use super::encoder::{EncodeMode, EncoderParams};
use super::loss::pair_loss;
use super::pairs::sample_pairs;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{Community, Graph};
use crate::ndiff::{adam_step, sum_gradients, DenseArray, OptimState, Tape};
use crate::rng;

/// Locator training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LocatorConfig {
    pub dim: usize,
    /// GCN layers; equals the ego-net radius used for candidates.
    pub layers: usize,
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Positive pairs per batch (and as many negatives).
    pub pairs_per_batch: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            dim: 64,
            layers: 2,
            alpha: 0.4,
            lr: 1e-4,
            epochs: 2,
            batches_per_epoch: 32,
            pairs_per_batch: 50,
            dropout: 0.2,
            seed: 0,
        }
    }
}

/// Per-batch training losses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocatorLog {
    pub batch_losses: Vec<f64>,
}

/// Loss and parameter gradients for one pair on its own tape.
fn pair_gradient(
    graph: &Graph,
    params: &EncoderParams,
    pair: (&Community, &Community),
    positive: bool,
    cfg: &LocatorConfig,
    seed: u64,
) -> Result<(f64, Vec<DenseArray>)> {
    let mut tape = Tape::new();
    let vars = tape.params(params.params())?;
    let mode = |side| EncodeMode::Train {
        dropout: cfg.dropout,
        seed: rng::derive(seed, "dropout", side),
    };
    let za = params.encode_on_tape(&mut tape, &vars, graph, pair.0, mode(0))?;
    let zb = params.encode_on_tape(&mut tape, &vars, graph, pair.1, mode(1))?;
    let loss = pair_loss(&mut tape, za, zb, positive, cfg.alpha)?;
    let grads = tape.backward(loss, params.params())?;
    Ok((tape.scalar(loss), grads))
}

/// Trains the encoder with the order-embedding margin loss. Each batch
/// draws fresh pairs, evaluates per-pair gradients (in parallel under
/// `exec`), sums them in pair order and takes one Adam step.
pub fn train_locator(
    graph: &Graph,
    train: &[Community],
    cfg: &LocatorConfig,
    exec: &Exec,
) -> Result<(EncoderParams, LocatorLog)> {
    if train.is_empty() {
        return Err(Error::NoCommunities("locator training set is empty".into()));
    }
    let mut params = EncoderParams::new(graph.feature_dim(), cfg.dim, cfg.layers, cfg.seed)?;
    let mut opt = OptimState::new(params.params(), cfg.lr);
    let mut log = LocatorLog::default();
    for epoch in 0..cfg.epochs {
        for b in 0..cfg.batches_per_epoch {
            let step = (epoch * cfg.batches_per_epoch + b) as u64;
            let batch = sample_pairs(graph, train, cfg.pairs_per_batch, rng::derive(cfg.seed, "batch", step))?;
            let npos = batch.positives.len();
            let pairs: Vec<(&Community, &Community)> = batch
                .positives
                .iter()
                .chain(&batch.negatives)
                .map(|(a, b)| (a, b))
                .collect();
            let base = rng::derive(cfg.seed, "batch-dropout", step);
            let results = exec.try_map(pairs.len(), |i| {
                pair_gradient(graph, &params, pairs[i], i < npos, cfg, rng::derive(base, "pair", i as u64))
            })?;
            let total: f64 = results.iter().map(|(loss, _)| loss).sum();
            let grads = sum_gradients(params.params(), results.into_iter().map(|(_, g)| g));
            adam_step(params.params_mut(), &grads, &mut opt)?;
            log::debug!("locator epoch {epoch} batch {b}: loss {total:.6}");
            log.batch_losses.push(total);
        }
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{synth_planted, PlantedParams};
    use crate::locator::loss::{margin_loss, order_penalty};
    use crate::locator::encode_community;
    use crate::ndiff::fd::{flatten, numeric_grad, rel_err};

    fn small() -> LocatorConfig {
        LocatorConfig {
            dim: 8,
            layers: 1,
            epochs: 1,
            batches_per_epoch: 3,
            pairs_per_batch: 4,
            ..LocatorConfig::default()
        }
    }

    fn data(seed: u64) -> (Graph, Vec<Community>) {
        synth_planted(&PlantedParams {
            communities: 4,
            min_size: 3,
            max_size: 6,
            p_in: 0.7,
            cross_links: 5,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_lr_leaves_params() {
        let (g, c) = data(1);
        let cfg = LocatorConfig { lr: 0.0, ..small() };
        let (p, log) = train_locator(&g, &c, &cfg, &Exec::Sequential).unwrap();
        assert_eq!(p, EncoderParams::new(g.feature_dim(), 8, 1, cfg.seed).unwrap());
        assert_eq!(log.batch_losses.len(), 3);
    }

    #[test]
    fn deterministic_across_strategies() {
        let (g, c) = data(2);
        let (a, la) = train_locator(&g, &c, &small(), &Exec::Sequential).unwrap();
        let (b, lb) = train_locator(&g, &c, &small(), &Exec::parallel()).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn empty_training_set_rejected() {
        let (g, _) = data(3);
        assert!(train_locator(&g, &[], &small(), &Exec::Sequential).is_err());
    }

    /// Margin-loss gradient on a two-community toy instance against
    /// central differences.
    #[test]
    fn margin_loss_gradient_matches_fd() {
        let (g, c) = data(5);
        for seed in 0..5 {
            let params = EncoderParams::new(g.feature_dim(), 6, 2, seed).unwrap();
            let pos = (c[0].clone(), Community::new(c[0].members()[..2].to_vec()).unwrap());
            let neg = (c[1].clone(), c[0].clone());
            let loss = |p: &crate::ndiff::ParamSet, want_grad: bool| {
                let enc = EncoderParams::from_param_set(p.clone()).unwrap();
                let mut t = Tape::new();
                let v = t.params(p).unwrap();
                let z = |t: &mut Tape, c: &Community| enc.encode_on_tape(t, &v, &g, c, EncodeMode::Inference).unwrap();
                let (a, b, x, y) = (z(&mut t, &pos.1), z(&mut t, &pos.0), z(&mut t, &neg.0), z(&mut t, &neg.1));
                let l = margin_loss(&mut t, &[(a, b)], &[(x, y)], 50.0).unwrap();
                let grads = want_grad.then(|| flatten(&t.backward(l, p).unwrap()));
                (t.scalar(l), grads)
            };
            let analytic = loss(params.params(), true).1.unwrap();
            let numeric = numeric_grad(params.params(), 1e-5, |p| loss(p, false).0);
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn training_separates_on_cliques() {
        let (g, comms) = synth_planted(&PlantedParams {
            communities: 10,
            min_size: 4,
            max_size: 8,
            p_in: 1.0,
            cross_links: 0,
            seed: 3,
        })
        .unwrap();
        let cfg = LocatorConfig {
            dim: 16,
            layers: 1,
            lr: 1e-2,
            epochs: 1,
            batches_per_epoch: 30,
            pairs_per_batch: 8,
            ..LocatorConfig::default()
        };
        let (p, _) = train_locator(&g, &comms, &cfg, &Exec::parallel()).unwrap();
        let fresh = sample_pairs(&g, &comms, 100, 12345).unwrap();
        let mean = |pairs: &[(Community, Community)]| {
            pairs
                .iter()
                .map(|(a, b)| {
                    let za = encode_community(&g, a, &p, EncodeMode::Inference).unwrap();
                    let zb = encode_community(&g, b, &p, EncodeMode::Inference).unwrap();
                    order_penalty(&za, &zb).unwrap()
                })
                .sum::<f64>()
                / pairs.len() as f64
        };
        let (pos, neg) = (mean(&fresh.positives), mean(&fresh.negatives));
        assert!(pos < neg, "positive {pos} vs negative {neg}");
    }
}
