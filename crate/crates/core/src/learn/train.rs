use super::{adam_step, loss_and_gradients, AdamState, LearnError, ModelParams, TrainConfig, TrainExample};
use crate::rng::rng_for;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Fraction of supervised (example, frame) pairs classified correctly, a
/// score of at least 0.5 counting as positive.
pub fn accuracy(params: &ModelParams, examples: &[TrainExample]) -> Result<f64, LearnError> {
    let counts: Vec<(usize, usize)> = examples
        .par_iter()
        .map(|ex| {
            ex.validate(params)?;
            let mut right = 0;
            let mut total = 0;
            for t in ex.supervised() {
                let positive = super::clamp_score(super::sigmoid(params.logit_at(&ex.features, t))) >= 0.5;
                right += (positive == ex.targets[t]) as usize;
                total += 1;
            }
            Ok((right, total))
        })
        .collect::<Result<_, LearnError>>()?;
    let (right, total) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
    Ok(if total == 0 { 0.0 } else { right as f64 / total as f64 })
}

/// Mini-batch Adam with early stopping on validation accuracy.
///
/// Returns the parameters of the best validation epoch together with the
/// per-epoch history. Training stops once validation accuracy has failed to
/// beat the best value for `patience` consecutive epochs.
pub fn train(
    train: &[TrainExample],
    val: &[TrainExample],
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochRecord>), LearnError> {
    config.validate()?;
    if train.is_empty() {
        return Err(LearnError::EmptySplit("training"));
    }
    if val.is_empty() {
        return Err(LearnError::EmptySplit("validation"));
    }
    let d = train[0].features.dim;
    let mut params = ModelParams::init(config.k, d, &mut rng_for(config.seed, "init"));
    for ex in train.iter().chain(val) {
        ex.validate(&params)?;
    }
    let mut history = Vec::new();
    if config.max_epochs == 0 {
        return Ok((params, history));
    }
    let mut shuffle = rng_for(config.seed, "shuffle");
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::NEG_INFINITY, params.clone());
    let mut stale = 0;
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (l, g) = loss_and_gradients(&params, &batch, config.weight_decay)?;
            adam_step(&mut state, &mut params, &g, config);
            loss_sum += l;
            batches += 1;
        }
        let val_accuracy = accuracy(&params, val)?;
        history.push(EpochRecord { epoch, train_loss: loss_sum / batches as f64, val_accuracy });
        if val_accuracy > best.0 {
            best = (val_accuracy, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok((best.1, history))
}
