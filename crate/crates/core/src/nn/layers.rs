//! Layer kernels with hand-written backward passes.
//!
//! Activations are `batch × channels × height × width`, row-major. All
//! kernels are generic over [`Real`] so the gradient checks can run in f64
//! while training runs in f32.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{gemm, Op, Real};

/// He-style normal initialization with standard deviation `sqrt(2 / fan_in)`.
pub fn he_normal<T: Real, R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64(z * std)
        })
        .collect()
}

/// 3×3 convolution (cross-correlation), stride 1, zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    /// `out × in × 3 × 3`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * 9;
        Conv2d {
            in_channels,
            out_channels,
            height,
            width,
            weight: he_normal(out_channels * fan_in, fan_in, rng),
            bias: vec![T::zero(); out_channels],
        }
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.plane()
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.plane()
    }

    /// Unfold one sample into `(in·9) × (H·W)` patches.
    fn im2col(&self, input: &[T], cols: &mut [T]) {
        let (h, w) = (self.height, self.width);
        let hw = h * w;
        for ci in 0..self.in_channels {
            let src = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        let out = &mut row[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            out.fill(T::zero());
                            continue;
                        }
                        let line = &src[sy as usize * w..(sy as usize + 1) * w];
                        match kx {
                            0 => {
                                out[0] = T::zero();
                                out[1..].copy_from_slice(&line[..w - 1]);
                            }
                            1 => out.copy_from_slice(line),
                            _ => {
                                out[..w - 1].copy_from_slice(&line[1..]);
                                out[w - 1] = T::zero();
                            }
                        }
                    }
                }
            }
        }
    }

    /// Fold patch gradients back onto the input grid (adjoint of `im2col`).
    fn col2im(&self, cols: &[T], grad_in: &mut [T]) {
        let (h, w) = (self.height, self.width);
        let hw = h * w;
        for ci in 0..self.in_channels {
            let dst = &mut grad_in[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let src = &row[y * w..(y + 1) * w];
                        let line = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                        match kx {
                            0 => {
                                for (d, &s) in line[..w - 1].iter_mut().zip(&src[1..]) {
                                    *d = *d + s;
                                }
                            }
                            1 => {
                                for (d, &s) in line.iter_mut().zip(src) {
                                    *d = *d + s;
                                }
                            }
                            _ => {
                                for (d, &s) in line[1..].iter_mut().zip(&src[..w - 1]) {
                                    *d = *d + s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, input: &[T], batch: usize) -> Vec<T> {
        assert_eq!(input.len(), batch * self.input_len(), "conv input shape");
        let hw = self.plane();
        let k = self.in_channels * 9;
        let mut cols = vec![T::zero(); k * hw];
        let mut out = vec![T::zero(); batch * self.output_len()];
        for b in 0..batch {
            self.im2col(&input[b * self.input_len()..(b + 1) * self.input_len()], &mut cols);
            let y = &mut out[b * self.output_len()..(b + 1) * self.output_len()];
            for (co, row) in y.chunks_exact_mut(hw).enumerate() {
                row.fill(self.bias[co]);
            }
            gemm(Op::N, Op::N, self.out_channels, k, hw, T::one(), &self.weight, &cols, T::one(), y);
        }
        out
    }

    /// Accumulates parameter gradients; writes the input gradient when asked.
    pub fn backward(
        &self,
        input: &[T],
        grad_out: &[T],
        batch: usize,
        grad_weight: &mut [T],
        grad_bias: &mut [T],
        mut grad_in: Option<&mut [T]>,
    ) {
        assert_eq!(grad_out.len(), batch * self.output_len(), "conv grad shape");
        let hw = self.plane();
        let k = self.in_channels * 9;
        let mut cols = vec![T::zero(); k * hw];
        let mut dcols = vec![T::zero(); k * hw];
        for b in 0..batch {
            let x = &input[b * self.input_len()..(b + 1) * self.input_len()];
            let dy = &grad_out[b * self.output_len()..(b + 1) * self.output_len()];
            self.im2col(x, &mut cols);
            gemm(Op::N, Op::T, self.out_channels, hw, k, T::one(), dy, &cols, T::one(), grad_weight);
            for (gb, row) in grad_bias.iter_mut().zip(dy.chunks_exact(hw)) {
                *gb = *gb + row.iter().copied().sum::<T>();
            }
            if let Some(gi) = grad_in.as_deref_mut() {
                gemm(Op::T, Op::N, k, self.out_channels, hw, T::one(), &self.weight, dy, T::zero(), &mut dcols);
                let dx = &mut gi[b * self.input_len()..(b + 1) * self.input_len()];
                dx.fill(T::zero());
                self.col2im(&dcols, dx);
            }
        }
    }
}

/// Per-channel batch normalization over batch and spatial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T> {
    pub channels: usize,
    pub spatial: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

/// Values kept from a train-mode batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize, spatial: usize) -> Self {
        BatchNorm2d {
            channels,
            spatial,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    fn len(&self) -> usize {
        self.channels * self.spatial
    }

    /// Normalize with batch statistics and update the running estimates.
    pub fn forward_train(&mut self, x: &[T], batch: usize) -> (Vec<T>, BnCache<T>) {
        assert_eq!(x.len(), batch * self.len(), "batch-norm input shape");
        let m = (batch * self.spatial) as f64;
        let mut y = vec![T::zero(); x.len()];
        let mut xhat = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); self.channels];
        for c in 0..self.channels {
            let planes = (0..batch).map(|b| &x[(b * self.channels + c) * self.spatial..][..self.spatial]);
            let mean = planes.clone().flat_map(|p| p.iter()).map(|v| v.as_f64()).sum::<f64>() / m;
            let var = planes
                .flat_map(|p| p.iter())
                .map(|v| (v.as_f64() - mean).powi(2))
                .sum::<f64>()
                / m;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = T::from_f64(istd);
            let (mean_t, istd_t) = (T::from_f64(mean), T::from_f64(istd));
            for b in 0..batch {
                let off = (b * self.channels + c) * self.spatial;
                for i in off..off + self.spatial {
                    let xh = (x[i] - mean_t) * istd_t;
                    xhat[i] = xh;
                    y[i] = self.gamma[c] * xh + self.beta[c];
                }
            }
            let mom = self.momentum;
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            self.running_mean[c] =
                T::from_f64((1.0 - mom) * self.running_mean[c].as_f64() + mom * mean);
            self.running_var[c] =
                T::from_f64((1.0 - mom) * self.running_var[c].as_f64() + mom * unbiased);
        }
        (y, BnCache { xhat, inv_std })
    }

    /// Normalize with the running statistics; samples are independent.
    pub fn forward_eval(&self, x: &[T], batch: usize) -> Vec<T> {
        assert_eq!(x.len(), batch * self.len(), "batch-norm input shape");
        let mut y = vec![T::zero(); x.len()];
        for c in 0..self.channels {
            let istd = T::from_f64(1.0 / (self.running_var[c].as_f64() + self.eps).sqrt());
            let scale = self.gamma[c] * istd;
            let shift = self.beta[c] - self.running_mean[c] * scale;
            for b in 0..batch {
                let off = (b * self.channels + c) * self.spatial;
                for i in off..off + self.spatial {
                    y[i] = x[i] * scale + shift;
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        cache: &BnCache<T>,
        grad_out: &[T],
        batch: usize,
        grad_gamma: &mut [T],
        grad_beta: &mut [T],
    ) -> Vec<T> {
        let m = T::from_f64((batch * self.spatial) as f64);
        let mut dx = vec![T::zero(); grad_out.len()];
        for c in 0..self.channels {
            let (mut sum_dy, mut sum_dy_xhat) = (T::zero(), T::zero());
            for b in 0..batch {
                let off = (b * self.channels + c) * self.spatial;
                for i in off..off + self.spatial {
                    sum_dy = sum_dy + grad_out[i];
                    sum_dy_xhat = sum_dy_xhat + grad_out[i] * cache.xhat[i];
                }
            }
            grad_gamma[c] = grad_gamma[c] + sum_dy_xhat;
            grad_beta[c] = grad_beta[c] + sum_dy;
            let k = self.gamma[c] * cache.inv_std[c] / m;
            for b in 0..batch {
                let off = (b * self.channels + c) * self.spatial;
                for i in off..off + self.spatial {
                    dx[i] = k * (m * grad_out[i] - sum_dy - cache.xhat[i] * sum_dy_xhat);
                }
            }
        }
        dx
    }
}

pub fn relu_forward<T: Real>(x: &[T]) -> Vec<T> {
    let mut y = x.to_vec();
    relu_in_place(&mut y);
    y
}

pub fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Gradient through ReLU given its output; dead units pass nothing.
pub fn relu_backward<T: Real>(output: &[T], grad_out: &[T]) -> Vec<T> {
    output
        .iter()
        .zip(grad_out)
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect()
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` at train time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    /// Returns the output and the mask (0 or `1/(1-rate)` per element).
    pub fn forward_train<T: Real, R: Rng + ?Sized>(&self, x: &[T], rng: &mut R) -> (Vec<T>, Vec<T>) {
        if self.rate <= 0.0 {
            return (x.to_vec(), vec![T::one(); x.len()]);
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = x
            .iter()
            .map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        (y, mask)
    }

    pub fn backward<T: Real>(mask: &[T], grad_out: &[T]) -> Vec<T> {
        mask.iter().zip(grad_out).map(|(&m, &g)| m * g).collect()
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        assert_eq!(x.len(), batch * self.inputs, "dense input shape");
        let mut y: Vec<T> = (0..batch).flat_map(|_| self.bias.iter().copied()).collect();
        gemm(Op::N, Op::T, batch, self.inputs, self.outputs, T::one(), x, &self.weight, T::one(), &mut y);
        y
    }

    /// Unlike the other layers this overwrites (rather than accumulates)
    /// the parameter gradients, which saves clearing the large weight buffer.
    pub fn backward(
        &self,
        x: &[T],
        grad_out: &[T],
        batch: usize,
        grad_weight: &mut [T],
        grad_bias: &mut [T],
        grad_in: Option<&mut [T]>,
    ) {
        assert_eq!(grad_out.len(), batch * self.outputs, "dense grad shape");
        gemm(Op::T, Op::N, self.outputs, batch, self.inputs, T::one(), grad_out, x, T::zero(), grad_weight);
        grad_bias.fill(T::zero());
        for row in grad_out.chunks_exact(self.outputs) {
            for (gb, &g) in grad_bias.iter_mut().zip(row) {
                *gb = *gb + g;
            }
        }
        if let Some(gi) = grad_in {
            gemm(Op::N, Op::N, batch, self.outputs, self.inputs, T::one(), grad_out, &self.weight, T::zero(), gi);
        }
    }
}
