//! Computational ghost imaging (CGI) with colored-noise speckle and a learned
//! convolutional reconstructor.
//!
//! The crate is split along the simulation flow:
//!
//! * [`speckle`] synthesizes white and pink illumination pattern stacks.
//! * [`data`] loads MNIST handwriting and renders block-style digits as scenes.
//! * [`forward`] simulates the bucket detector, including calibrated noise.
//! * [`recon`] runs the correlation reconstruction and builds two-level ground truth.
//! * [`nn`] is a from-scratch CNN with SGD-with-momentum training.
//! * [`metrics`] holds PSNR, visibility and correlation coefficient.
//! * [`pipeline`] strings the pieces into corpus building, evaluation and figure sweeps.

pub mod container;
pub mod data;
pub mod error;
pub mod forward;
pub mod image_io;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod recon;
pub mod speckle;

pub use error::{Error, Result};

/// Scene height used throughout (independent DMD super-pixels).
pub const SCENE_HEIGHT: usize = 54;
/// Scene width used throughout.
pub const SCENE_WIDTH: usize = 98;
/// `SCENE_HEIGHT * SCENE_WIDTH`.
pub const SCENE_PIXELS: usize = SCENE_HEIGHT * SCENE_WIDTH;
