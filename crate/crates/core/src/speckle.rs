//! Seeded speckle pattern synthesis.
//!
//! White patterns are i.i.d. uniform pixels. Pink patterns start from a white
//! field and have every Fourier amplitude scaled by `f^(-1/2)`, which gives a
//! `1/f` power spectral density and positive correlation between neighboring
//! pixels. The DC coefficient is left untouched.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spectral family of a pattern stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    White,
    Pink,
}

impl Family {
    /// Exponent applied to the Fourier amplitude at radial frequency `f`.
    pub fn amplitude_exponent(self) -> f64 {
        match self {
            Family::White => 0.0,
            Family::Pink => -0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::White => "white",
            Family::Pink => "pink",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Family::White => 0,
            Family::Pink => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Family> {
        match code {
            0 => Some(Family::White),
            1 => Some(Family::Pink),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" => Ok(Family::White),
            "pink" => Ok(Family::Pink),
            other => Err(Error::Usage(format!(
                "unknown pattern family {other:?} (expected white or pink)"
            ))),
        }
    }
}

/// Everything needed to regenerate a pattern stack bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub height: usize,
    pub width: usize,
    pub count: usize,
    pub family: Family,
    pub seed: u64,
    pub binarize: bool,
}

impl PatternSpec {
    /// A binarized spec on the standard 54×98 scene grid.
    pub fn scene(family: Family, count: usize, seed: u64) -> Self {
        PatternSpec {
            height: crate::SCENE_HEIGHT,
            width: crate::SCENE_WIDTH,
            count,
            family,
            seed,
            binarize: true,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidSpec("pattern count must be at least 1".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidSpec(format!(
                "pattern dimensions must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    /// Seed for pattern `index`; each pattern can be regenerated on its own.
    pub fn pattern_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }

    /// Short identifier binding bucket series and reports to this stack.
    pub fn id(&self) -> String {
        format!(
            "{}-{}x{}-n{}-s{}{}",
            self.family,
            self.height,
            self.width,
            self.count,
            self.seed,
            if self.binarize { "-bin" } else { "" }
        )
    }
}

/// A sequence of patterns, stored row-major, pattern after pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStack {
    spec: PatternSpec,
    data: Vec<f32>,
}

impl PatternStack {
    /// Wrap raw values, checking the range and binarity invariants.
    pub fn from_raw(spec: PatternSpec, data: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.count * spec.pixels() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} pattern values, got {}",
                spec.count * spec.pixels(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidSpec(format!(
                "pattern value {} at index {bad} outside [0,1]",
                data[bad]
            )));
        }
        if spec.binarize && data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidSpec(
                "binarized stack holds a value outside {0,1}".into(),
            ));
        }
        Ok(PatternStack { spec, data })
    }

    pub fn spec(&self) -> &PatternSpec {
        &self.spec
    }

    pub fn count(&self) -> usize {
        self.spec.count
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn pixels(&self) -> usize {
        self.spec.pixels()
    }

    pub fn pattern(&self, index: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn patterns(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.pixels())
    }

    /// The first `count` patterns. Because pattern seeds depend only on the
    /// index, this equals generating the `PatternSpec` with the smaller count.
    pub fn prefix(&self, count: usize) -> Result<PatternStack> {
        if count == 0 || count > self.count() {
            return Err(Error::InvalidSpec(format!(
                "prefix of {count} patterns from a stack of {}",
                self.count()
            )));
        }
        let spec = PatternSpec { count, ..self.spec };
        Ok(PatternStack {
            spec,
            data: self.data[..count * self.pixels()].to_vec(),
        })
    }

    /// All values, `count × height × width`, row-major.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Patterns as a row-major `count × pixels` f64 matrix.
    pub fn to_f64_matrix(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Generate a stack of either family.
pub fn generate(spec: &PatternSpec) -> Result<PatternStack> {
    match spec.family {
        Family::White => generate_white(spec),
        Family::Pink => generate_pink(spec),
    }
}

/// I.i.d. uniform patterns.
pub fn generate_white(spec: &PatternSpec) -> Result<PatternStack> {
    expect_family(spec, Family::White)?;
    spec.validate()?;
    let n = spec.pixels();
    let mut data = Vec::with_capacity(spec.count * n);
    for i in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.pattern_seed(i));
        let mut field: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if spec.binarize {
            binarize_at_median(&mut field);
        }
        data.extend(field.iter().map(|&v| v as f32));
    }
    PatternStack::from_raw(*spec, data)
}

/// Pink (`1/f` power) patterns built by amplitude shaping in Fourier space.
pub fn generate_pink(spec: &PatternSpec) -> Result<PatternStack> {
    expect_family(spec, Family::Pink)?;
    spec.validate()?;
    let mut fft = Fft2::new(spec.height, spec.width);
    let gain = amplitude_gain(spec.height, spec.width, Family::Pink.amplitude_exponent());
    let n = spec.pixels();
    let mut data = Vec::with_capacity(spec.count * n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for i in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.pattern_seed(i));
        for c in buf.iter_mut() {
            *c = Complex::new(rng.gen::<f64>(), 0.0);
        }
        fft.forward(&mut buf);
        for (c, g) in buf.iter_mut().zip(&gain) {
            *c *= *g;
        }
        fft.inverse(&mut buf);
        let mut field: Vec<f64> = buf.iter().map(|c| c.re).collect();
        min_max_normalize(&mut field);
        if spec.binarize {
            binarize_at_median(&mut field);
        }
        data.extend(field.iter().map(|&v| v as f32));
    }
    PatternStack::from_raw(*spec, data)
}

fn expect_family(spec: &PatternSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::InvalidSpec(format!(
            "spec family is {}, generator expects {family}",
            spec.family
        )));
    }
    Ok(())
}

/// Signed frequency index along an axis of length `n`, in cycles per image.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Radial frequency of FFT bin `(ky, kx)` in cycles per image.
pub fn radial_frequency(ky: usize, kx: usize, height: usize, width: usize) -> f64 {
    signed_frequency(ky, height).hypot(signed_frequency(kx, width))
}

fn amplitude_gain(height: usize, width: usize, exponent: f64) -> Vec<f64> {
    let mut gain = Vec::with_capacity(height * width);
    for ky in 0..height {
        for kx in 0..width {
            let f = radial_frequency(ky, kx, height, width);
            gain.push(if f == 0.0 { 1.0 } else { f.powf(exponent) });
        }
    }
    gain
}

fn min_max_normalize(field: &mut [f64]) {
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span > 0.0 {
        for v in field.iter_mut() {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
    } else {
        field.fill(0.5);
    }
}

/// Threshold at the upper median; values equal to the threshold become 1.
pub fn binarize_at_median(field: &mut [f64]) {
    let mut sorted = field.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[sorted.len() / 2];
    for v in field.iter_mut() {
        *v = if *v >= threshold { 1.0 } else { 0.0 };
    }
}

/// Separable 2-D FFT over a row-major `height × width` buffer.
pub struct Fft2 {
    height: usize,
    width: usize,
    rows: std::sync::Arc<dyn Fft<f64>>,
    cols: std::sync::Arc<dyn Fft<f64>>,
    rows_inv: std::sync::Arc<dyn Fft<f64>>,
    cols_inv: std::sync::Arc<dyn Fft<f64>>,
    column: Vec<Complex<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            height,
            width,
            rows: planner.plan_fft_forward(width),
            cols: planner.plan_fft_forward(height),
            rows_inv: planner.plan_fft_inverse(width),
            cols_inv: planner.plan_fft_inverse(height),
            column: vec![Complex::new(0.0, 0.0); height],
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&mut self, buf: &mut [Complex<f64>]) {
        let (rows, cols) = (self.rows.clone(), self.cols.clone());
        self.apply(buf, &*rows, &*cols);
    }

    /// Inverse transform including the `1/(H·W)` factor.
    pub fn inverse(&mut self, buf: &mut [Complex<f64>]) {
        let (rows, cols) = (self.rows_inv.clone(), self.cols_inv.clone());
        self.apply(buf, &*rows, &*cols);
        let scale = 1.0 / (self.height * self.width) as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    fn apply(&mut self, buf: &mut [Complex<f64>], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        assert_eq!(buf.len(), self.height * self.width);
        rows.process(buf);
        for x in 0..self.width {
            for y in 0..self.height {
                self.column[y] = buf[y * self.width + x];
            }
            cols.process(&mut self.column);
            for y in 0..self.height {
                buf[y * self.width + x] = self.column[y];
            }
        }
    }
}

/// One bin of a radially averaged power spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBin {
    /// Bin center in cycles per image.
    pub frequency: f64,
    pub power: f64,
}

/// Periodogram averaged over patterns, then over unit-width annuli.
///
/// Each pattern's mean is removed before the transform so non-DC bins of a
/// constant pattern are exactly zero; the DC bin reports `pixels · mean²`.
pub fn radial_power_spectrum(stack: &PatternStack) -> Result<Vec<SpectrumBin>> {
    let (h, w) = (stack.height(), stack.width());
    let n = h * w;
    let mut fft = Fft2::new(h, w);
    let mut power = vec![0.0f64; n];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for pattern in stack.patterns() {
        let mean = pattern.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        for (c, &v) in buf.iter_mut().zip(pattern) {
            *c = Complex::new(f64::from(v) - mean, 0.0);
        }
        fft.forward(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr() / n as f64;
        }
        power[0] += n as f64 * mean * mean;
    }
    let patterns = stack.count() as f64;

    let max_bin = radial_frequency(h / 2, w / 2, h, w).round() as usize;
    let mut sums = vec![0.0f64; max_bin + 1];
    let mut counts = vec![0usize; max_bin + 1];
    for ky in 0..h {
        for kx in 0..w {
            let bin = radial_frequency(ky, kx, h, w).round() as usize;
            sums[bin] += power[ky * w + kx] / patterns;
            counts[bin] += 1;
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(k, (&s, &c))| SpectrumBin {
            frequency: k as f64,
            power: s / c as f64,
        })
        .collect())
}

/// Default mid-frequency band for slope fits: `[3, min(H,W)/4]` cycles per image.
pub fn mid_band(height: usize, width: usize) -> (f64, f64) {
    (3.0, height.min(width) as f64 / 4.0)
}

/// Least-squares slope of `ln power` against `ln frequency` over `band`.
pub fn spectral_slope(curve: &[SpectrumBin], band: (f64, f64)) -> Result<f64> {
    let points: Vec<(f64, f64)> = curve
        .iter()
        .filter(|b| b.frequency >= band.0 && b.frequency <= band.1 && b.power > 0.0)
        .map(|b| (b.frequency.ln(), b.power.ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two positive bins in [{}, {}] for a slope fit",
            band.0, band.1
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Pearson correlation over all horizontal neighbor pairs, pooled over patterns.
pub fn neighbor_correlation(stack: &PatternStack) -> Result<f64> {
    let w = stack.width();
    if w < 2 {
        return Err(Error::Degenerate("patterns need at least two columns".into()));
    }
    let (mut n, mut sa, mut sb) = (0.0f64, 0.0f64, 0.0f64);
    for p in stack.patterns() {
        for row in p.chunks_exact(w) {
            for pair in row.windows(2) {
                sa += f64::from(pair[0]);
                sb += f64::from(pair[1]);
                n += 1.0;
            }
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cov, mut va, mut vb) = (0.0f64, 0.0f64, 0.0f64);
    for p in stack.patterns() {
        for row in p.chunks_exact(w) {
            for pair in row.windows(2) {
                let a = f64::from(pair[0]) - ma;
                let b = f64::from(pair[1]) - mb;
                cov += a * b;
                va += a * a;
                vb += b * b;
            }
        }
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("constant patterns have no correlation".into()));
    }
    Ok(cov / (va * vb).sqrt())
}
