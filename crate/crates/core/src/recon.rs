//! Correlation reconstruction and the two-level ground truth.
//!
//! The estimator is the ensemble covariance between each pattern pixel and
//! the bucket values, `G = <I·B> - <I><B>`, evaluated in the equivalent
//! centered form `G = (1/N) Σ_i I_i (B_i - <B>)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Scene;
use crate::forward::BucketSeries;
use crate::linalg::{gemm, Op};
use crate::speckle::PatternStack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    RawCgi,
    DlOutput,
}

impl Source {
    pub(crate) fn code(self) -> u8 {
        match self {
            Source::RawCgi => 0,
            Source::DlOutput => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Source::RawCgi),
            1 => Some(Source::DlOutput),
            _ => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::RawCgi => "raw-cgi",
            Source::DlOutput => "dl-output",
        })
    }
}

/// A reconstructed image `G`, stored at single precision so persisted images
/// are exact copies of the in-memory ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconImage {
    pub height: usize,
    pub width: usize,
    pub g: Vec<f32>,
    pub beta: f64,
    pub source: Source,
}

impl ReconImage {
    pub fn new(height: usize, width: usize, g: Vec<f32>, beta: f64, source: Source) -> Result<Self> {
        if g.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} image with {} values",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reconstructed image".into()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("sampling ratio {beta} must be positive")));
        }
        Ok(ReconImage {
            height,
            width,
            g,
            beta,
            source,
        })
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.g.iter().map(|&v| f64::from(v)).collect()
    }

    /// Copy rescaled to `[0, 1]`; a constant image maps to all zeros.
    pub fn min_max_normalized(&self) -> Vec<f32> {
        let (lo, hi) = self
            .g
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        if span > 0.0 {
            self.g.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.g.len()]
        }
    }
}

/// `X` with its two class means.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub height: usize,
    pub width: usize,
    pub x: Vec<f64>,
    pub mean_object: f64,
    pub mean_background: f64,
}

/// Sampling ratio `N_pattern / N_pixel`.
pub fn beta_for(count: usize, height: usize, width: usize) -> Result<f64> {
    if count == 0 || height == 0 || width == 0 {
        return Err(Error::Config(format!(
            "beta needs positive inputs, got count={count}, {height}x{width}"
        )));
    }
    Ok(count as f64 / (height * width) as f64)
}

/// Pattern count realizing ratio `beta` on `pixels`, rounded to nearest.
pub fn pattern_count_for(beta: f64, pixels: usize) -> Result<usize> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("sampling ratio {beta} must be positive")));
    }
    let n = (beta * pixels as f64).round() as usize;
    Ok(n.max(1))
}

fn check_pair(stack: &PatternStack, series: &BucketSeries) -> Result<()> {
    if stack.count() != series.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} patterns but {} bucket values",
            stack.count(),
            series.len()
        )));
    }
    if stack.count() < 2 {
        return Err(Error::Config(
            "correlation reconstruction needs at least two patterns".into(),
        ));
    }
    Ok(())
}

/// Covariance reconstruction of one bucket series.
pub fn reconstruct(stack: &PatternStack, series: &BucketSeries) -> Result<ReconImage> {
    check_pair(stack, series)?;
    let n = stack.count() as f64;
    let mean = series.mean();
    let mut g = vec![0.0f64; stack.pixels()];
    for (pattern, &b) in stack.patterns().zip(&series.values) {
        let w = (b - mean) / n;
        for (acc, &p) in g.iter_mut().zip(pattern) {
            *acc += w * f64::from(p);
        }
    }
    ReconImage::new(
        stack.height(),
        stack.width(),
        g.into_iter().map(|v| v as f32).collect(),
        beta_for(stack.count(), stack.height(), stack.width())?,
        Source::RawCgi,
    )
}

/// [`reconstruct`] for many series through a single matrix product.
pub fn reconstruct_batch(stack: &PatternStack, series: &[BucketSeries]) -> Result<Vec<ReconImage>> {
    for s in series {
        check_pair(stack, s)?;
    }
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let (n, p, s) = (stack.count(), stack.pixels(), series.len());
    let mut weights = vec![0.0f64; s * n];
    for (row, b) in weights.chunks_exact_mut(n).zip(series) {
        let mean = b.mean();
        for (w, v) in row.iter_mut().zip(&b.values) {
            *w = (v - mean) / n as f64;
        }
    }
    let patterns = stack.to_f64_matrix();
    let mut out = vec![0.0f64; s * p];
    gemm(Op::N, Op::N, s, n, p, 1.0, &weights, &patterns, 0.0, &mut out);
    let beta = beta_for(n, stack.height(), stack.width())?;
    out.chunks_exact(p)
        .map(|g| {
            ReconImage::new(
                stack.height(),
                stack.width(),
                g.iter().map(|&v| v as f32).collect(),
                beta,
                Source::RawCgi,
            )
        })
        .collect()
}

/// Class means over object (transmission 1) and background pixels.
///
/// Means are accumulated relative to the first member of each class, so a
/// class holding a single repeated value returns that value exactly.
pub fn class_means(scene: &Scene, values: &[f64]) -> Result<(f64, f64)> {
    if values.len() != scene.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "scene has {} pixels, image has {}",
            scene.pixels(),
            values.len()
        )));
    }
    let mut shift = [None::<f64>; 2];
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (i, &v) in values.iter().enumerate() {
        let class = usize::from(scene.is_open(i));
        let base = *shift[class].get_or_insert(v);
        sums[class] += v - base;
        counts[class] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InvalidScene("a pixel class is empty".into()));
    }
    let mean = |c: usize| shift[c].unwrap_or(0.0) + sums[c] / counts[c] as f64;
    Ok((mean(1), mean(0)))
}

/// Two-level ground truth from an image's class means.
pub fn ground_truth_from_values(scene: &Scene, values: &[f64]) -> Result<GroundTruth> {
    let (mean_object, mean_background) = class_means(scene, values)?;
    let x = scene
        .transmission()
        .iter()
        .map(|&t| if t == 1 { mean_object } else { mean_background })
        .collect();
    Ok(GroundTruth {
        height: scene.height(),
        width: scene.width(),
        x,
        mean_object,
        mean_background,
    })
}

/// Ground truth `X` for reconstruction `g` of `scene`.
pub fn ground_truth(scene: &Scene, g: &ReconImage) -> Result<GroundTruth> {
    if (g.height, g.width) != (scene.height(), scene.width()) {
        return Err(Error::DimensionMismatch(format!(
            "scene is {}x{}, image is {}x{}",
            scene.height(),
            scene.width(),
            g.height,
            g.width
        )));
    }
    ground_truth_from_values(scene, &g.values_f64())
}
