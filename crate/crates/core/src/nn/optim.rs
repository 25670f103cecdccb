//! SGD with momentum and the step-decay learning-rate schedule.
//!
//! The update is `θ_{ℓ+1} = θ_ℓ - α ∇E(θ_ℓ) + γ (θ_ℓ - θ_{ℓ-1})`. The
//! momentum buffer holds the previously applied step `θ_ℓ - θ_{ℓ-1}`.

use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::linalg::Real;
use crate::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_initial: f64,
    pub lr_after_decay: f64,
    /// First (0-based) epoch trained at `lr_after_decay`.
    pub decay_epoch: usize,
    pub max_epochs: usize,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_initial: 1e-3,
            lr_after_decay: 1e-4,
            decay_epoch: 75,
            max_epochs: 100,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_initial > 0.0 && self.lr_after_decay > 0.0) {
            return bad(format!(
                "learning rates must be positive ({}, {})",
                self.lr_initial, self.lr_after_decay
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch count must be positive".into());
        }
        if self.decay_epoch >= self.max_epochs {
            return bad(format!(
                "decay epoch {} must come before the last epoch {}",
                self.decay_epoch, self.max_epochs
            ));
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch < self.decay_epoch {
            self.lr_initial
        } else {
            self.lr_after_decay
        }
    }
}

/// Momentum buffers mirroring the parameter tensors, plus the iteration count `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdmState<T> {
    pub velocity: Vec<Vec<T>>,
    pub iteration: u64,
}

impl<T: Real> SgdmState<T> {
    pub fn new(net: &Network<T>) -> Self {
        SgdmState {
            velocity: net.params().iter().map(|p| vec![T::zero(); p.len()]).collect(),
            iteration: 0,
        }
    }
}

/// Weights plus optimizer state: everything a checkpoint must restore.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub network: Network<T>,
    pub optimizer: SgdmState<T>,
    /// Epochs completed so far.
    pub epoch: usize,
}

impl<T: Real> NetworkParams<T> {
    pub fn new(network: Network<T>) -> Self {
        let optimizer = SgdmState::new(&network);
        NetworkParams {
            network,
            optimizer,
            epoch: 0,
        }
    }
}

/// One update on a flat tensor. `step` holds `θ_ℓ - θ_{ℓ-1}` and is replaced
/// by the step just applied.
pub fn sgdm_update<T: Real>(theta: &mut [T], step: &mut [T], grad: &[T], lr: T, momentum: T) {
    for ((t, s), &g) in theta.iter_mut().zip(step.iter_mut()).zip(grad) {
        let next = momentum * *s - lr * g;
        *t = *t + next;
        *s = next;
    }
}

/// Apply one SGDM step at the learning rate scheduled for `epoch`.
pub fn sgdm_step<T: Real>(
    params: &mut NetworkParams<T>,
    grads: &Gradients<T>,
    config: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    let names = Network::<T>::param_names(params.network.blocks.len());
    if grads.tensors.len() != params.optimizer.velocity.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gradient tensors for {} parameters",
            grads.tensors.len(),
            params.optimizer.velocity.len()
        )));
    }
    for ((name, g), v) in names.iter().zip(&grads.tensors).zip(&params.optimizer.velocity) {
        if g.len() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "gradient {name} has {} values, parameter has {}",
                g.len(),
                v.len()
            )));
        }
        if let Some(i) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient {name}[{i}] = {:?} at iteration {}",
                g[i], params.optimizer.iteration
            )));
        }
    }
    let lr = T::from_f64(config.learning_rate(epoch));
    let momentum = T::from_f64(config.momentum);
    for ((theta, step), g) in params
        .network
        .params_mut()
        .into_iter()
        .zip(params.optimizer.velocity.iter_mut())
        .zip(&grads.tensors)
    {
        sgdm_update(theta, step, g, lr, momentum);
    }
    params.network.bump_version();
    params.optimizer.iteration += 1;
    Ok(())
}
