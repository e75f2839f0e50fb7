use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{mse_loss, CnnModel, ModelGrads};
use super::optim::AdamState;
use super::tensor::Tensor3;
use crate::error::{Result, SimError};
use crate::rng::{rng_from, tags};

/// Mini-batch Adam training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub mini_batch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_bias: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for the channel-estimate refiner: 10 epochs, batches of 32.
    pub fn ce_defaults() -> Self {
        TrainConfig {
            max_epochs: 10,
            mini_batch: 32,
            learning_rate: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            eps_bias: 1e-8,
            validation_fraction: 0.15,
            seed: 0,
        }
    }

    /// Defaults for the carrier-offset refiner: 60 epochs, batches of 8.
    pub fn cfo_defaults() -> Self {
        TrainConfig {
            max_epochs: 60,
            mini_batch: 8,
            ..Self::ce_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mini_batch == 0 {
            return Err(SimError::InvalidConfig("mini_batch must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(SimError::InvalidConfig(
                "validation_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch loss pair; losses are means over samples of the per-sample
/// squared error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// How a dataset of `n` samples splits under a validation fraction:
/// (train, validation) counts. 10000 at 15% gives 8500/1500.
pub fn validation_split_counts(n: usize, fraction: f64) -> (usize, usize) {
    let val = ((n as f64) * fraction).round() as usize;
    let val = val.min(n.saturating_sub(1));
    (n - val, val)
}

/// Mini-batch Adam over shuffled epochs. Deterministic for a given config
/// seed: the validation split and every epoch's ordering derive from it, and
/// per-sample gradients are reduced in batch order regardless of how the
/// batch is scheduled across threads. Returns the per-epoch loss history.
pub fn train(
    model: &mut CnnModel,
    inputs: &[Tensor3],
    targets: &[Tensor3],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if inputs.is_empty() {
        return Err(SimError::EmptyDataset);
    }
    if inputs.len() != targets.len() {
        return Err(SimError::LengthMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    cfg.validate()?;

    let n = inputs.len();
    let (train_n, _) = validation_split_counts(n, cfg.validation_fraction);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng_from(cfg.seed, &[tags::TRAIN_SPLIT]));
    let (train_idx, val_idx) = indices.split_at(train_n);

    let mut adam = AdamState::new(
        model.param_count(),
        cfg.beta1,
        cfg.beta2,
        cfg.learning_rate,
        cfg.eps_bias,
    );

    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut order = train_idx.to_vec();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng_from(cfg.seed, &[tags::TRAIN_EPOCH, epoch as u64]));

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.mini_batch) {
            let results: Vec<(f64, ModelGrads)> = batch
                .par_iter()
                .map(|&i| model.backward(&inputs[i], &targets[i]))
                .collect::<Result<_>>()?;
            let mut acc = ModelGrads::zeros_like(model);
            let scale = 1.0 / batch.len() as f64;
            for (loss, grads) in &results {
                loss_sum += loss;
                acc.add_scaled(grads, scale);
            }
            model.adam_update(&mut adam, &acc);
        }

        let val_loss = if val_idx.is_empty() {
            0.0
        } else {
            let total: f64 = val_idx
                .par_iter()
                .map(|&i| {
                    let pred = model.forward(&inputs[i])?;
                    mse_loss(&pred, &targets[i])
                })
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            total / val_idx.len() as f64
        };

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_loss,
        });
    }
    Ok(history)
}
