//! Bucket-detector simulation and SNR-calibrated additive noise.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Scene;
use crate::linalg::{gemm, Op};
use crate::speckle::PatternStack;
use crate::{Error, Result};

/// One detector value per pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSeries {
    pub values: Vec<f64>,
    /// `None` for a noiseless series.
    pub snr_db: Option<f64>,
    /// Identifier of the pattern stack that produced the series.
    pub pattern_ref: String,
}

impl BucketSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `index,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Requested SNR in decibels (`+inf` disables noise) and the noise seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        NoiseSpec { snr_db, seed }
    }

    /// The same SNR with a seed derived for item `index` of a batch.
    pub fn for_item(&self, index: usize) -> NoiseSpec {
        NoiseSpec {
            snr_db: self.snr_db,
            seed: self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        }
    }
}

fn check_dims(scene: &Scene, stack: &PatternStack) -> Result<()> {
    if scene.height() != stack.height() || scene.width() != stack.width() {
        return Err(Error::DimensionMismatch(format!(
            "scene is {}x{}, patterns are {}x{}",
            scene.height(),
            scene.width(),
            stack.height(),
            stack.width()
        )));
    }
    Ok(())
}

/// Noiseless bucket values: `Σ pattern_i · transmission` for every pattern.
pub fn measure(scene: &Scene, stack: &PatternStack) -> Result<BucketSeries> {
    check_dims(scene, stack)?;
    let open = scene.open_indices();
    let values = stack
        .patterns()
        .map(|p| open.iter().map(|&j| f64::from(p[j])).sum())
        .collect();
    Ok(BucketSeries {
        values,
        snr_db: None,
        pattern_ref: stack.spec().id(),
    })
}

/// [`measure`] for many scenes at once through one matrix product.
///
/// Values agree with [`measure`] to rounding; for binary stacks they are
/// identical because every partial sum is an exact integer.
pub fn measure_batch(scenes: &[Scene], stack: &PatternStack) -> Result<Vec<BucketSeries>> {
    for s in scenes {
        check_dims(s, stack)?;
    }
    let (n, p, s) = (stack.count(), stack.pixels(), scenes.len());
    if s == 0 {
        return Ok(Vec::new());
    }
    let patterns = stack.to_f64_matrix();
    // scenes as a pixels × s matrix, row-major
    let mut t = vec![0.0f64; p * s];
    for (k, scene) in scenes.iter().enumerate() {
        for (j, &v) in scene.transmission().iter().enumerate() {
            t[j * s + k] = f64::from(v);
        }
    }
    let mut out = vec![0.0f64; n * s];
    gemm(Op::N, Op::N, n, p, s, 1.0, &patterns, &t, 0.0, &mut out);
    let id = stack.spec().id();
    Ok((0..s)
        .map(|k| BucketSeries {
            values: (0..n).map(|i| out[i * s + k]).collect(),
            snr_db: None,
            pattern_ref: id.clone(),
        })
        .collect())
}

/// Mean noise level `P_b` giving `10·log10(P_s / P_b) = snr_db`.
pub fn noise_mean_for(signal_mean: f64, snr_db: f64) -> f64 {
    signal_mean / 10f64.powf(snr_db / 10.0)
}

/// The noise realization [`add_noise`] would add: i.i.d. uniform on
/// `[0, 2·P_b]`, so its mean is `P_b`.
pub fn noise_component(series: &BucketSeries, noise: &NoiseSpec) -> Result<BucketSeries> {
    if !noise.snr_db.is_finite() && noise.snr_db != f64::INFINITY {
        return Err(Error::Calibration(format!("snr {} dB is not usable", noise.snr_db)));
    }
    let signal = series.mean();
    if !(signal > 0.0) {
        return Err(Error::Calibration(format!(
            "mean signal {signal} must be positive"
        )));
    }
    let values = if noise.snr_db == f64::INFINITY {
        vec![0.0; series.len()]
    } else {
        let upper = 2.0 * noise_mean_for(signal, noise.snr_db);
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        (0..series.len()).map(|_| rng.gen::<f64>() * upper).collect()
    };
    Ok(BucketSeries {
        values,
        snr_db: Some(noise.snr_db),
        pattern_ref: series.pattern_ref.clone(),
    })
}

/// Add calibrated non-negative uniform noise; `snr_db = +inf` returns the input.
pub fn add_noise(series: &BucketSeries, noise: &NoiseSpec) -> Result<BucketSeries> {
    if series.snr_db.is_some() {
        return Err(Error::Calibration("series already carries noise".into()));
    }
    if noise.snr_db == f64::INFINITY {
        return Ok(series.clone());
    }
    let b = noise_component(series, noise)?;
    Ok(BucketSeries {
        values: series.values.iter().zip(&b.values).map(|(s, n)| s + n).collect(),
        snr_db: Some(noise.snr_db),
        pattern_ref: series.pattern_ref.clone(),
    })
}

/// `10·log10(mean(signal) / mean(noise))`.
pub fn measure_snr(signal: &BucketSeries, noise: &BucketSeries) -> Result<f64> {
    if signal.len() != noise.len() || signal.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} values, noise has {}",
            signal.len(),
            noise.len()
        )));
    }
    let pn = noise.mean();
    if !(pn > 0.0) {
        return Err(Error::Calibration(format!("noise mean {pn} must be positive")));
    }
    Ok(10.0 * (signal.mean() / pn).log10())
}
