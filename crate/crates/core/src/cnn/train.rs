//! Mini-batch ADAM on binary cross-entropy with optional early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CnnArch, CnnModel, ForwardCache, Gradients, TrainConfig};
use crate::error::{Error, Result};
use crate::math::softplus;
use crate::rng;
use crate::spectra::SpectraSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's mini-batches.
    pub train_loss: f64,
    /// Eval-mode loss on the held-out split, when early stopping is active.
    pub val_loss: Option<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(model: &CnnModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, model: &mut CnnModel, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.adam_beta1.powi(self.step);
        let c2 = 1.0 - cfg.adam_beta2.powi(self.step);
        for (((w, g), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(&grads.0)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..w.len() {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

fn first_non_finite(model: &CnnModel, grads: &Gradients) -> String {
    let names = model.tensor_names();
    for (name, (w, g)) in names.iter().zip(model.tensors().iter().zip(&grads.0)) {
        if w.iter().chain(g).any(|v| !v.is_finite()) {
            return name.clone();
        }
    }
    "output".into()
}

/// Mean eval-mode cross-entropy over `rows`.
pub(crate) fn mean_loss(model: &CnnModel, data: &SpectraSet, rows: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut cache = ForwardCache::default();
    for chunk in rows.chunks(32) {
        let xs: Vec<&[f64]> = chunk.iter().map(|&i| data.row(i)).collect();
        model.run_into(&xs, None, &mut cache);
        for (&i, &logit) in chunk.iter().zip(cache.logits()) {
            total += softplus(logit) - f64::from(data.labels()[i]) * logit;
        }
    }
    total / rows.len() as f64
}

/// Stratified hold-out of roughly `fraction` of each class.
fn split_validation(data: &SpectraSet, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::stream(seed, 1);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for label in [1u8, 0] {
        let mut idx: Vec<usize> = (0..data.n_spectra()).filter(|&i| data.labels()[i] == label).collect();
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f64) * fraction).round() as usize;
        // keep at least one training example per class
        let n_val = n_val.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Reorders `order` so every prefix holds the classes in proportion,
/// keeping the within-class order.
fn interleave_classes(order: &[usize], labels: &[u8]) -> Vec<usize> {
    let (ones, zeros): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| labels[i] == 1);
    let (n1, n0) = (ones.len(), zeros.len());
    let mut out = Vec::with_capacity(order.len());
    let (mut a, mut b) = (0, 0);
    while a < n1 || b < n0 {
        // next slot goes to the class that is furthest behind its share
        let take_one = b >= n0 || (a < n1 && (a as f64 + 0.5) / n1 as f64 <= (b as f64 + 0.5) / n0 as f64);
        if take_one {
            out.push(ones[a]);
            a += 1;
        } else {
            out.push(zeros[b]);
            b += 1;
        }
    }
    out
}

/// Trains a freshly initialized network on `data` (raw intensities).
pub fn train(arch: CnnArch, data: &SpectraSet, cfg: &TrainConfig) -> Result<CnnModel> {
    cfg.validate()?;
    data.require_both_classes()?;
    let mut model = CnnModel::init(arch, data.n_points(), cfg.seed)?;

    let (train_rows, val_rows) = match cfg.patience {
        Some(_) if cfg.validation_fraction > 0.0 => split_validation(data, cfg.validation_fraction, cfg.seed),
        _ => ((0..data.n_spectra()).collect(), Vec::new()),
    };
    let early_stopping = cfg.patience.is_some() && !val_rows.is_empty();

    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut cache = ForwardCache::default();
    let mut order = train_rows.clone();
    let mut shuffle_rng = rng::stream(cfg.seed, 2);
    let mut dropout_rng = rng::stream(cfg.seed, 3);
    let mut best: Option<(f64, CnnModel)> = None;
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        order = interleave_classes(&order, data.labels());
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            let xs: Vec<&[f64]> = batch.iter().map(|&i| data.row(i)).collect();
            model.run_into(&xs, Some(&mut dropout_rng), &mut cache);
            let mut batch_loss = 0.0;
            let mut dlogits = Vec::with_capacity(batch.len());
            for ((&i, &logit), &o) in batch.iter().zip(cache.logits()).zip(cache.outputs()) {
                let y = f64::from(data.labels()[i]);
                batch_loss += softplus(logit) - y * logit;
                dlogits.push((o - y) * scale);
            }
            model.backward(&mut cache, &dlogits, Some(&mut grads), false);
            if !batch_loss.is_finite() || grads.0.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no + 1,
                    layer: first_non_finite(&model, &grads),
                });
            }
            epoch_loss += batch_loss;
            adam.update(&mut model, &grads, cfg);
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val_loss = if early_stopping {
            Some(mean_loss(&model, data, &val_rows))
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        log::debug!("epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:?}");

        if let (Some(v), Some(patience)) = (val_loss, cfg.patience) {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }

    if let Some((_, best_model)) = best {
        model = best_model;
    }
    model.history = history;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::WavenumberAxis;

    fn toy(n_per_class: usize, p: usize) -> SpectraSet {
        let axis = WavenumberAxis::uniform(0.0, 1.0, p).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            let jitter = (i as f64 * 0.37).sin() * 0.05;
            rows.push((0..p).map(|j| 1.0 + jitter + if j > p / 2 { 0.5 } else { 0.0 }).collect());
            labels.push(1);
            rows.push((0..p).map(|j| 1.0 + jitter + if j <= p / 2 { 0.5 } else { 0.0 }).collect());
            labels.push(0);
        }
        SpectraSet::new(axis, rows, labels).unwrap()
    }

    fn small_arch() -> CnnArch {
        CnnArch {
            blocks: 2,
            filters: 4,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            hidden: 8,
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let data = toy(20, 40);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 8,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(small_arch(), &data, &cfg).unwrap();
        let b = train(small_arch(), &data, &cfg).unwrap();
        let bits = |m: &CnnModel| -> Vec<(u64, Option<u64>)> {
            m.history.iter().map(|r| (r.train_loss.to_bits(), r.val_loss.map(f64::to_bits))).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = toy(10, 40);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            seed: 4,
            patience: None,
            ..TrainConfig::default()
        };
        let trained = train(small_arch(), &data, &cfg).unwrap();
        let init = CnnModel::init(small_arch(), 40, 4).unwrap();
        assert_eq!(trained.tensors(), init.tensors());
        assert_eq!(trained.history.len(), 3);
    }

    #[test]
    fn validation_split_is_stratified() {
        let data = toy(30, 40);
        let (train_rows, val_rows) = split_validation(&data, 0.1, 0);
        assert_eq!(train_rows.len() + val_rows.len(), 60);
        let val_ones = val_rows.iter().filter(|&&i| data.labels()[i] == 1).count();
        assert_eq!(val_ones, 3);
        assert_eq!(val_rows.len(), 6);
    }

    #[test]
    fn single_class_rejected() {
        let data = toy(5, 40);
        let ones = data.class_subset(1);
        assert!(train(small_arch(), &ones, &TrainConfig::default()).is_err());
    }
}
