use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Frame, Standardizer};
use crate::{Error, Result};

use super::{argmax, CaNet, Dense, Mode, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient folded into the update.
    pub weight_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    /// Per-epoch multiplicative learning-rate factor; 1 disables it.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            weight_decay: 2e-4,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 300,
            patience: 20,
            lr_decay: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience >= 1
            && self.lr_decay > 0.0
            && self.lr_decay <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid training config {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Running mean over the epoch's mini-batches (dropout active).
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.train_acc,
                opt(r.val_loss),
                opt(r.val_acc)
            );
        }
        out
    }
}

/// Standardized inputs (one row per frame) and labels.
pub fn frames_to_matrix<T: Real>(
    frames: &[Frame],
    standardizer: &Standardizer,
) -> Result<(Array2<T>, Vec<usize>)> {
    let dim = standardizer.dim();
    let mut x = Array2::zeros((frames.len(), dim));
    for (mut row, frame) in x.rows_mut().into_iter().zip(frames) {
        let mut input = frame.input();
        standardizer.apply_in_place(&mut input)?;
        row.iter_mut()
            .zip(input)
            .for_each(|(r, v)| *r = T::from_f64(v));
    }
    Ok((x, frames.iter().map(|f| f.label as usize).collect()))
}

/// Mean loss and accuracy in eval mode.
pub fn evaluate<T: Real>(
    model: &CaNet<T>,
    x: ArrayView2<T>,
    labels: &[usize],
) -> Result<(f64, f64)> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("nothing to evaluate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for start in (0..labels.len()).step_by(256) {
        let end = (start + 256).min(labels.len());
        let batch = x.slice(ndarray::s![start..end, ..]);
        let cache = model.forward_batch(batch, Mode::Eval, &mut rng)?;
        loss += model.loss(&cache, &labels[start..end]) * (end - start) as f64;
        for (row, &y) in cache
            .probabilities
            .rows()
            .into_iter()
            .zip(&labels[start..end])
        {
            if argmax(row.iter()) == y {
                correct += 1;
            }
        }
    }
    Ok((
        loss / labels.len() as f64,
        correct as f64 / labels.len() as f64,
    ))
}

fn sgd_step<T: Real>(
    params: &mut Dense<T>,
    grads: &Dense<T>,
    velocity: &mut Dense<T>,
    lr: T,
    momentum: T,
    decay: T,
) {
    let update = |v: &mut T, &g: &T, p: &mut T| {
        *v = momentum * *v - lr * (g + decay * *p);
        *p = *p + *v;
    };
    Zip::from(&mut velocity.weights)
        .and(&grads.weights)
        .and(&mut params.weights)
        .for_each(update);
    Zip::from(&mut velocity.bias)
        .and(&grads.bias)
        .and(&mut params.bias)
        .for_each(update);
}

/// Trains on labelled frames; the model's standardizer must already be
/// fitted on `train_frames`.
pub fn train<T: Real>(
    model: &mut CaNet<T>,
    train_frames: &[Frame],
    val_frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<History> {
    let (tx, ty) = frames_to_matrix::<T>(train_frames, &model.standardizer)?;
    let (vx, vy) = frames_to_matrix::<T>(val_frames, &model.standardizer)?;
    train_matrices(model, tx.view(), &ty, vx.view(), &vy, cfg, |_| {})
}

/// Mini-batch SGD with momentum over pre-standardized matrices. With a
/// non-empty validation set, training stops after `patience` epochs
/// without improvement and the best weights are restored.
pub fn train_matrices<T: Real>(
    model: &mut CaNet<T>,
    train_x: ArrayView2<T>,
    train_y: &[usize],
    val_x: ArrayView2<T>,
    val_y: &[usize],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    cfg.validate()?;
    if train_y.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if train_x.nrows() != train_y.len() || val_x.nrows() != val_y.len() {
        return Err(Error::ShapeMismatch {
            expected: train_y.len(),
            got: train_x.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Dense<T>> = model
        .layers()
        .iter()
        .map(|l| Dense::zeros(l.inputs(), l.outputs()))
        .collect();
    let momentum = T::from_f64(cfg.momentum);
    let decay = T::from_f64(cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, CaNet<T>)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let lr = T::from_f64(cfg.learning_rate * cfg.lr_decay.powi(epoch as i32 - 1));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x = train_x.select(Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            let (loss, grads, cache) = model.loss_and_grad(x.view(), &y, Mode::Train, &mut rng)?;
            loss_sum += loss * batch.len() as f64;
            for (row, &label) in cache.probabilities.rows().into_iter().zip(&y) {
                if argmax(row.iter()) == label {
                    correct += 1;
                }
            }
            for ((p, g), v) in model
                .layers_mut()
                .into_iter()
                .zip(&grads)
                .zip(velocity.iter_mut())
            {
                sgd_step(p, g, v, lr, momentum, decay);
            }
        }
        if !model.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "training diverged in epoch {epoch}; lower the learning rate"
            )));
        }
        let n = train_y.len() as f64;
        let (val_loss, val_acc) = if val_y.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(model, val_x, val_y)?;
            (Some(l), Some(a))
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        history.epochs.push(record);

        if let Some(val_loss) = val_loss {
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                best = Some((val_loss, model.clone()));
                history.best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }
    if let Some((_, best_model)) = best {
        *model = best_model;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canet::Architecture;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let x = Array2::from_shape_fn((n, 10), |(i, j)| {
            let signal = if j == y[i] { 2.0 } else { 0.0 };
            signal + rng.random::<f64>() * 0.5
        });
        (x, y)
    }

    fn arch() -> Architecture {
        Architecture {
            main: vec![8, 16, 12],
            aux_in: 2,
            aux_width: 4,
            classes: 4,
        }
    }

    #[test]
    fn loss_decreases_at_small_learning_rate() {
        let (x, y) = toy(64, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = CaNet::<f64>::with_architecture(arch(), &mut rng).unwrap();
        net.dropout = 0.0;
        // Full-batch steps without dropout: each record's running loss is
        // the loss before that epoch's update.
        let cfg = TrainConfig {
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 6,
            ..TrainConfig::default()
        };
        let empty = Array2::zeros((0, 10));
        let h = train_matrices(&mut net, x.view(), &y, empty.view(), &[], &cfg, |_| {}).unwrap();
        let losses: Vec<f64> = h.epochs.iter().map(|r| r.train_loss).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0], "{losses:?}");
        }
    }

    #[test]
    fn early_stopping_restores_best() {
        let (x, y) = toy(80, 3);
        let (vx, vy) = toy(40, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = CaNet::<f64>::with_architecture(arch(), &mut rng).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 16,
            max_epochs: 400,
            patience: 3,
            ..TrainConfig::default()
        };
        let h = train_matrices(&mut net, x.view(), &y, vx.view(), &vy, &cfg, |_| {}).unwrap();
        assert!(h.epochs.len() < 400);
        let best = h.epochs[h.best_epoch - 1].val_loss.unwrap();
        assert!(h.epochs.iter().all(|r| r.val_loss.unwrap() >= best));
        let (loss, _) = evaluate(&net, vx.view(), &vy).unwrap();
        assert!((loss - best).abs() < 1e-12);
        assert!(h
            .to_csv()
            .starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n1,"));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = CaNet::<f64>::with_architecture(arch(), &mut rng).unwrap();
        let empty = Array2::zeros((0, 10));
        let r = train_matrices(
            &mut net,
            empty.view(),
            &[],
            empty.view(),
            &[],
            &TrainConfig::default(),
            |_| {},
        );
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
