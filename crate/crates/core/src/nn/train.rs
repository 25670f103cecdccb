//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::loss_mse;
use super::network::{Gradients, Mode};
use super::optim::{sgdm_step, NetworkParams, TrainConfig};
use crate::{Error, Result};

/// Network input, regression target and loss normalizer for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Vec<f32>,
    pub target: Vec<f32>,
    pub normalizer: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationPlan {
    pub batches_per_epoch: usize,
    pub epochs: usize,
}

impl IterationPlan {
    pub fn total(&self) -> usize {
        self.batches_per_epoch * self.epochs
    }
}

/// Full batches only; the remainder of each shuffled epoch is dropped.
pub fn iteration_plan(samples: usize, batch: usize, epochs: usize) -> Result<IterationPlan> {
    if batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let batches_per_epoch = samples / batch;
    if batches_per_epoch == 0 || epochs == 0 {
        return Err(Error::Config(format!(
            "{samples} samples with batch size {batch} over {epochs} epochs gives no iterations"
        )));
    }
    Ok(IterationPlan {
        batches_per_epoch,
        epochs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub iterations: u64,
}

fn epoch_seed(seed: u64, epoch: usize, stream: u64) -> u64 {
    seed ^ ((epoch as u64) << 8 | stream).wrapping_mul(0x2545_F491_4F6C_DD1D)
}

/// Mean loss over a batch and the averaged output gradient.
pub fn batch_loss(outputs: &[f32], batch: &[&TrainingSample]) -> Result<(f64, Vec<f32>)> {
    let n = outputs.len() / batch.len();
    let scale = 1.0 / batch.len() as f32;
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(outputs.len());
    for (out, s) in outputs.chunks_exact(n).zip(batch) {
        let (l, g) = loss_mse(out, &s.target, s.normalizer)?;
        total += f64::from(l);
        grad.extend(g.into_iter().map(|v| v * scale));
    }
    Ok((total / batch.len() as f64, grad))
}

/// Train from `params.epoch` up to `config.max_epochs`, calling `on_epoch`
/// after every epoch. Shuffling and dropout are seeded per epoch, so a run
/// resumed from a checkpoint continues exactly as the uninterrupted run.
pub fn train<F: FnMut(&EpochStats, &NetworkParams<f32>) -> Result<()>>(
    params: &mut NetworkParams<f32>,
    samples: &[TrainingSample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    let plan = iteration_plan(samples.len(), config.batch_size, config.max_epochs)?;
    if config.batch_size < 2 {
        return Err(Error::Config("batch normalization needs batches of at least two".into()));
    }
    let pixels = params.network.pixels();
    for (i, s) in samples.iter().enumerate() {
        if s.input.len() != pixels || s.target.len() != pixels {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} has {}/{} values, network expects {pixels}",
                s.input.len(),
                s.target.len()
            )));
        }
    }
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut input = Vec::with_capacity(config.batch_size * pixels);
    let mut grads = Gradients::zeros_like(&params.network);
    while params.epoch < plan.epochs {
        let epoch = params.epoch;
        let mut shuffle = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch, 1));
        let mut dropout = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch, 2));
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for chunk in order.chunks_exact(config.batch_size) {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &samples[i]).collect();
            input.clear();
            for s in &batch {
                input.extend_from_slice(&s.input);
            }
            let (out, cache) =
                params
                    .network
                    .forward(&input, batch.len(), Mode::Train, &mut dropout)?;
            let (loss, grad) = batch_loss(&out, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {epoch}, iteration {}",
                    params.optimizer.iteration
                )));
            }
            loss_sum += loss;
            let cache = cache.expect("train mode returns a cache");
            params.network.backward_into(&cache, &grad, &mut grads)?;
            drop(cache);
            sgdm_step(params, &grads, config, epoch)?;
        }
        params.epoch += 1;
        let stats = EpochStats {
            epoch,
            learning_rate: config.learning_rate(epoch),
            mean_loss: loss_sum / plan.batches_per_epoch as f64,
            iterations: params.optimizer.iteration,
        };
        on_epoch(&stats, params)?;
        history.push(stats);
    }
    Ok(history)
}
