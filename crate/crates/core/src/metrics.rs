//! Image-quality indicators: normalized MSE, PSNR, visibility and the
//! correlation coefficient.
//!
//! The MSE is normalized by the object-class mean `<G_o>` of the ground
//! truth, and PSNR is built on that normalized MSE. PSNR values are therefore
//! only comparable between reports produced by this crate.

use std::io::Write;

use serde::Serialize;

use crate::data::{Scene, Style};
use crate::recon::{class_means, GroundTruth, ReconImage};
use crate::{Error, Result};

/// Default gray-level bit depth.
pub const DEFAULT_BIT_DEPTH: u32 = 8;

fn check_len(g: &[f64], x: &GroundTruth) -> Result<()> {
    if g.len() != x.x.len() {
        return Err(Error::DimensionMismatch(format!(
            "image has {} pixels, ground truth {}",
            g.len(),
            x.x.len()
        )));
    }
    Ok(())
}

/// `(1/N) Σ ((G_i - X_i) / <G_o>)²` over raw values.
pub fn mse_values(g: &[f64], x: &GroundTruth) -> Result<f64> {
    check_len(g, x)?;
    let norm = x.mean_object;
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(format!("object mean {norm} cannot normalize")));
    }
    let sum: f64 = g
        .iter()
        .zip(&x.x)
        .map(|(gi, xi)| ((gi - xi) / norm).powi(2))
        .sum();
    Ok(sum / g.len() as f64)
}

pub fn mse(g: &ReconImage, x: &GroundTruth) -> Result<f64> {
    mse_values(&g.values_f64(), x)
}

/// PSNR in dB from a precomputed MSE; a zero MSE gives `+inf`.
pub fn psnr_from_mse(mse: f64, k: u32) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let peak = 2f64.powi(k as i32) - 1.0;
    10.0 * (peak * peak / mse).log10()
}

pub fn psnr(g: &ReconImage, x: &GroundTruth, k: u32) -> Result<f64> {
    Ok(psnr_from_mse(mse(g, x)?, k))
}

/// Visibility `(<G_o> - <G_b>) / (<G_o> + <G_b>)` over raw values.
pub fn vis_values(g: &[f64], scene: &Scene) -> Result<f64> {
    let (o, b) = class_means(scene, g)?;
    let denom = o + b;
    if denom == 0.0 {
        return Err(Error::Degenerate("class means sum to zero".into()));
    }
    Ok((o - b) / denom)
}

pub fn vis(g: &ReconImage, scene: &Scene) -> Result<f64> {
    vis_values(&g.values_f64(), scene)
}

/// Pearson correlation with population moments.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "correlation of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("correlation with a zero-variance image".into()));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

pub fn cc_values(g: &[f64], x: &GroundTruth) -> Result<f64> {
    check_len(g, x)?;
    pearson(g, &x.x)
}

pub fn cc(g: &ReconImage, x: &GroundTruth) -> Result<f64> {
    cc_values(&g.values_f64(), x)
}

/// One report row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub method: String,
    pub beta: f64,
    pub snr_db: Option<f64>,
    pub digit: u8,
    pub style: Style,
    pub psnr: f64,
    pub vis: f64,
    pub cc: f64,
    pub mse: f64,
    pub k: u32,
}

impl QualityReport {
    /// Score `g` against `scene`, building the ground truth from `g` itself.
    ///
    /// Degenerate metrics (e.g. a constant image has no correlation) are
    /// reported as NaN rather than failing the whole row.
    pub fn score(
        method: &str,
        g: &ReconImage,
        scene: &Scene,
        snr_db: Option<f64>,
        k: u32,
    ) -> Result<Self> {
        let values = g.values_f64();
        let x = crate::recon::ground_truth_from_values(scene, &values)?;
        let mse = mse_values(&values, &x).unwrap_or(f64::NAN);
        Ok(QualityReport {
            method: method.to_string(),
            beta: g.beta,
            snr_db,
            digit: scene.label,
            style: scene.style,
            psnr: psnr_from_mse(mse, k),
            vis: vis_values(&values, scene).unwrap_or(f64::NAN),
            cc: cc_values(&values, &x).unwrap_or(f64::NAN),
            mse,
            k,
        })
    }
}

pub const CSV_HEADER: [&str; 8] = ["method", "beta", "snr_db", "digit", "psnr", "vis", "cc", "style"];

/// Shortest round-trip decimal for a float; `inf`/`nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Write report rows as CSV. Noiseless rows carry `inf` in the SNR column.
pub fn write_reports<W: Write>(rows: &[QualityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            fmt_f64(r.beta),
            fmt_f64(r.snr_db.unwrap_or(f64::INFINITY)),
            r.digit.to_string(),
            fmt_f64(r.psnr),
            fmt_f64(r.vis),
            fmt_f64(r.cc),
            r.style.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
