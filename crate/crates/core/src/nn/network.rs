//! The reconstruction network: four conv → batch-norm → ReLU blocks, dropout,
//! and a fully connected layer producing one value per scene pixel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{he_normal, relu_backward, relu_in_place, BatchNorm2d, BnCache, Conv2d, Dense, Dropout};
use crate::linalg::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenseInit {
    He,
    Zeros,
}

/// Shape description, stored verbatim in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Arch {
    pub height: usize,
    pub width: usize,
    /// Output channels of each conv block.
    pub channels: Vec<usize>,
    pub dropout: f64,
    pub dense_init: DenseInit,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            height: crate::SCENE_HEIGHT,
            width: crate::SCENE_WIDTH,
            channels: vec![16, 32, 32, 1],
            dropout: 0.2,
            dense_init: DenseInit::Zeros,
        }
    }
}

impl Arch {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("network input must be non-empty".into()));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config(format!(
                "conv channel widths must be positive, got {:?}",
                self.channels
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let mut prev = 1;
        let mut n = 0;
        for &c in &self.channels {
            n += c * prev * 9 + c + 2 * c;
            prev = c;
        }
        n + prev * self.pixels() * self.pixels() + self.pixels()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub arch: Arch,
    pub blocks: Vec<Block<T>>,
    pub dense: Dense<T>,
    version: u64,
}

/// Parameter gradients in [`Network::param_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            tensors: net.params().iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&v| v == T::zero())
    }
}

struct BlockCache<T> {
    bn: BnCache<T>,
    output: Vec<T>,
}

/// Activations saved by a train-mode forward pass.
pub struct Cache<T> {
    version: u64,
    batch: usize,
    input: Vec<T>,
    blocks: Vec<BlockCache<T>>,
    mask: Vec<T>,
    dense_input: Vec<T>,
}

impl<T: Real> Network<T> {
    pub fn new(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (arch.height, arch.width);
        let mut blocks = Vec::with_capacity(arch.channels.len());
        let mut prev = 1;
        for &c in &arch.channels {
            blocks.push(Block {
                conv: Conv2d::new(prev, c, h, w, &mut rng),
                bn: BatchNorm2d::new(c, h * w),
            });
            prev = c;
        }
        let inputs = prev * h * w;
        let outputs = h * w;
        let weight = match arch.dense_init {
            DenseInit::He => he_normal(inputs * outputs, inputs, &mut rng),
            DenseInit::Zeros => vec![T::zero(); inputs * outputs],
        };
        Ok(Network {
            dense: Dense {
                inputs,
                outputs,
                weight,
                bias: vec![T::zero(); outputs],
            },
            arch,
            blocks,
            version: 0,
        })
    }

    pub fn pixels(&self) -> usize {
        self.arch.pixels()
    }

    /// Parameter tensor names, in the order of [`Network::params`].
    pub fn param_names(blocks: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(4 * blocks + 2);
        for i in 0..blocks {
            for p in ["conv.weight", "conv.bias", "bn.gamma", "bn.beta"] {
                names.push(format!("block{i}.{p}"));
            }
        }
        names.push("dense.weight".into());
        names.push("dense.bias".into());
        names
    }

    pub fn params(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &self.blocks {
            out.extend([&b.conv.weight, &b.conv.bias, &b.bn.gamma, &b.bn.beta]);
        }
        out.extend([&self.dense.weight, &self.dense.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(&mut b.conv.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
        }
        out.push(&mut self.dense.weight);
        out.push(&mut self.dense.bias);
        out
    }

    /// Running statistics, named `block{i}.bn.running_mean` / `running_var`.
    pub fn buffers(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.bn.running_mean"), &b.bn.running_mean));
            out.push((format!("block{i}.bn.running_var"), &b.bn.running_var));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.bn.running_mean);
            out.push(&mut b.bn.running_var);
        }
        out
    }

    /// Invalidate caches taken before a parameter change.
    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    fn check_input(&self, input: &[T], batch: usize) -> Result<()> {
        if batch == 0 || input.len() != batch * self.pixels() {
            return Err(Error::DimensionMismatch(format!(
                "expected {batch} inputs of {} pixels, got {} values",
                self.pixels(),
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Deterministic inference with running statistics and no dropout.
    pub fn predict(&self, input: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_input(input, batch)?;
        let mut x = input.to_vec();
        for b in &self.blocks {
            let z = b.conv.forward(&x, batch);
            x = b.bn.forward_eval(&z, batch);
            relu_in_place(&mut x);
        }
        Ok(self.dense.forward(&x, batch))
    }

    /// Forward pass. Train mode needs `batch >= 2`, uses batch statistics and
    /// a dropout mask drawn from `rng`, and returns the cache for [`Network::backward`].
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &[T],
        batch: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<T>, Option<Cache<T>>)> {
        if mode == Mode::Eval {
            return Ok((self.predict(input, batch)?, None));
        }
        self.check_input(input, batch)?;
        if batch < 2 {
            return Err(Error::Config(
                "train-mode batch normalization needs at least two samples".into(),
            ));
        }
        let mut caches: Vec<BlockCache<T>> = Vec::with_capacity(self.blocks.len());
        for b in &mut self.blocks {
            let x = caches.last().map_or(input, |c| &c.output[..]);
            let z = b.conv.forward(x, batch);
            let (mut y, bn) = b.bn.forward_train(&z, batch);
            drop(z);
            relu_in_place(&mut y);
            caches.push(BlockCache { bn, output: y });
        }
        let last = &caches.last().expect("at least one block").output;
        let (dropped, mask) = Dropout { rate: self.arch.dropout }.forward_train(last, rng);
        let y = self.dense.forward(&dropped, batch);
        Ok((
            y,
            Some(Cache {
                version: self.version,
                batch,
                input: input.to_vec(),
                blocks: caches,
                mask,
                dense_input: dropped,
            }),
        ))
    }

    /// Parameter gradients for output gradient `grad_out`.
    pub fn backward(&self, cache: &Cache<T>, grad_out: &[T]) -> Result<Gradients<T>> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// [`Network::backward`] writing into an existing buffer, whose previous
    /// contents are discarded.
    pub fn backward_into(&self, cache: &Cache<T>, grad_out: &[T], grads: &mut Gradients<T>) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::Config(
                "stale activation cache: parameters changed since the forward pass".into(),
            ));
        }
        if cache.blocks.len() != self.blocks.len() {
            return Err(Error::Config("activation cache does not match the network".into()));
        }
        let batch = cache.batch;
        if grad_out.len() != batch * self.pixels() {
            return Err(Error::DimensionMismatch(format!(
                "output gradient has {} values, expected {}",
                grad_out.len(),
                batch * self.pixels()
            )));
        }
        let shapes_match = grads.tensors.len() == 4 * self.blocks.len() + 2
            && grads.tensors.iter().zip(self.params()).all(|(g, p)| g.len() == p.len());
        if !shapes_match {
            return Err(Error::DimensionMismatch("gradient buffer does not match the network".into()));
        }
        let nb = self.blocks.len();
        let (block_grads, dense_grads) = grads.tensors.split_at_mut(4 * nb);
        for g in block_grads.iter_mut() {
            g.fill(T::zero());
        }
        let (dw, db) = dense_grads.split_at_mut(1);
        let mut dx = vec![T::zero(); cache.dense_input.len()];
        self.dense
            .backward(&cache.dense_input, grad_out, batch, &mut dw[0], &mut db[0], Some(&mut dx));
        let mut delta = Dropout::backward(&cache.mask, &dx);
        drop(dx);
        for (i, (block, bc)) in self.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let g = &mut block_grads[4 * i..4 * i + 4];
            let (conv_g, bn_g) = g.split_at_mut(2);
            let (gw, gb) = conv_g.split_at_mut(1);
            let (gg, gbeta) = bn_g.split_at_mut(1);
            let dy = relu_backward(&bc.output, &delta);
            let dz = block.bn.backward(&bc.bn, &dy, batch, &mut gg[0], &mut gbeta[0]);
            drop(dy);
            let input = if i == 0 { &cache.input } else { &cache.blocks[i - 1].output };
            if i == 0 {
                block.conv.backward(input, &dz, batch, &mut gw[0], &mut gb[0], None);
            } else {
                delta.resize(input.len(), T::zero());
                block
                    .conv
                    .backward(input, &dz, batch, &mut gw[0], &mut gb[0], Some(&mut delta));
            }
        }
        Ok(())
    }

    /// Convert to another precision (used by the f64 gradient checks).
    pub fn cast<U: Real>(&self) -> Network<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        Network {
            arch: self.arch.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    conv: Conv2d {
                        in_channels: b.conv.in_channels,
                        out_channels: b.conv.out_channels,
                        height: b.conv.height,
                        width: b.conv.width,
                        weight: c(&b.conv.weight),
                        bias: c(&b.conv.bias),
                    },
                    bn: BatchNorm2d {
                        channels: b.bn.channels,
                        spatial: b.bn.spatial,
                        gamma: c(&b.bn.gamma),
                        beta: c(&b.bn.beta),
                        running_mean: c(&b.bn.running_mean),
                        running_var: c(&b.bn.running_var),
                        eps: b.bn.eps,
                        momentum: b.bn.momentum,
                    },
                })
                .collect(),
            dense: Dense {
                inputs: self.dense.inputs,
                outputs: self.dense.outputs,
                weight: c(&self.dense.weight),
                bias: c(&self.dense.bias),
            },
            version: 0,
        }
    }
}
