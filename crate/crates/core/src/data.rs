//! Scenes: MNIST handwriting ingestion, block-style digits, and resizing onto
//! the 54×98 scene grid.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SCENE_HEIGHT, SCENE_WIDTH};

pub const MNIST_SIDE: usize = 28;
const IMAGES_MAGIC: u32 = 2051;
const LABELS_MAGIC: u32 = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Handwriting,
    Block,
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Handwriting => "handwriting",
            Style::Block => "block",
        })
    }
}

/// A binary transmission map (1 transmits, 0 blocks) plus its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    height: usize,
    width: usize,
    transmission: Vec<u8>,
    pub label: u8,
    pub style: Style,
}

impl Scene {
    pub fn new(
        height: usize,
        width: usize,
        transmission: Vec<u8>,
        label: u8,
        style: Style,
    ) -> Result<Self> {
        if height == 0 || width == 0 || transmission.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "scene {height}x{width} with {} pixels",
                transmission.len()
            )));
        }
        if transmission.iter().any(|&t| t > 1) {
            return Err(Error::InvalidScene("transmission must be 0 or 1".into()));
        }
        let open = transmission.iter().filter(|&&t| t == 1).count();
        if open == 0 {
            return Err(Error::InvalidScene("no transmitting pixel".into()));
        }
        if open == transmission.len() {
            return Err(Error::InvalidScene("no blocked pixel".into()));
        }
        Ok(Scene {
            height,
            width,
            transmission,
            label,
            style,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.transmission.len()
    }

    pub fn transmission(&self) -> &[u8] {
        &self.transmission
    }

    pub fn is_open(&self, index: usize) -> bool {
        self.transmission[index] == 1
    }

    pub fn open_count(&self) -> usize {
        self.transmission.iter().filter(|&&t| t == 1).count()
    }

    /// Indices of transmitting pixels.
    pub fn open_indices(&self) -> Vec<usize> {
        self.transmission
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
    Test,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    scenes: Vec<Scene>,
    pub split: Split,
}

impl Dataset {
    pub fn new(scenes: Vec<Scene>, split: Split) -> Result<Self> {
        let Some(first) = scenes.first() else {
            return Err(Error::Config("dataset is empty".into()));
        };
        let dims = (first.height, first.width);
        if let Some(bad) = scenes.iter().position(|s| (s.height, s.width) != dims) {
            return Err(Error::DimensionMismatch(format!(
                "scene {bad} is {}x{}, dataset is {}x{}",
                scenes[bad].height, scenes[bad].width, dims.0, dims.1
            )));
        }
        Ok(Dataset { scenes, split })
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn into_scenes(self) -> Vec<Scene> {
        self.scenes
    }
}

/// Grayscale IDX images as stored on disk.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[index * n..(index + 1) * n]
    }
}

struct Cursor<'a> {
    file: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            file: self.file.to_string(),
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn u32_be(&mut self) -> Result<u32> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated: wanted {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

/// Parse an IDX3 image file (magic 2051), reading at most `limit` records.
pub fn parse_idx_images(file: &str, bytes: &[u8], limit: Option<usize>) -> Result<IdxImages> {
    let mut cur = Cursor { file, bytes, pos: 0 };
    let magic = cur.u32_be()?;
    if magic != IMAGES_MAGIC {
        cur.pos = 0;
        return Err(cur.err(format!("bad magic {magic}, expected {IMAGES_MAGIC}")));
    }
    let count = cur.u32_be()? as usize;
    let rows = cur.u32_be()? as usize;
    let cols = cur.u32_be()? as usize;
    if rows == 0 || cols == 0 {
        return Err(cur.err(format!("zero image dimension {rows}x{cols}")));
    }
    let wanted = match limit {
        Some(n) if n > count => {
            return Err(cur.err(format!("requested {n} images but file holds {count}")))
        }
        Some(n) => n,
        None => count,
    };
    let pixels = cur.take(wanted * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

/// Parse an IDX1 label file (magic 2049).
pub fn parse_idx_labels(file: &str, bytes: &[u8], limit: Option<usize>) -> Result<Vec<u8>> {
    let mut cur = Cursor { file, bytes, pos: 0 };
    let magic = cur.u32_be()?;
    if magic != LABELS_MAGIC {
        cur.pos = 0;
        return Err(cur.err(format!("bad magic {magic}, expected {LABELS_MAGIC}")));
    }
    let count = cur.u32_be()? as usize;
    let wanted = match limit {
        Some(n) if n > count => {
            return Err(cur.err(format!("requested {n} labels but file holds {count}")))
        }
        Some(n) => n,
        None => count,
    };
    let labels = cur.take(wanted)?.to_vec();
    if let Some(bad) = labels.iter().position(|&l| l > 9) {
        cur.pos = 8 + bad;
        return Err(cur.err(format!("label {} is not a digit", labels[bad])));
    }
    Ok(labels)
}

/// Read a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find_idx(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no {stem}[.gz] under {}", dir.display()),
    )))
}

/// Binarize an MNIST image at half of full scale.
pub fn binarize_mnist(pixels: &[u8]) -> Vec<u8> {
    pixels.iter().map(|&p| u8::from(p >= 128)).collect()
}

/// Load the first `count` training digits from an MNIST directory
/// (`train-images-idx3-ubyte[.gz]` and `train-labels-idx1-ubyte[.gz]`).
pub fn load_mnist(dir: &Path, count: usize) -> Result<Dataset> {
    load_mnist_prefix(dir, "train", Some(count), Split::Train)
}

/// Like [`load_mnist`] for any file prefix (`train`, `t10k`); `None` reads every record.
pub fn load_mnist_prefix(dir: &Path, prefix: &str, count: Option<usize>, split: Split) -> Result<Dataset> {
    if count == Some(0) {
        return Err(Error::Config("MNIST count must be positive".into()));
    }
    let img_path = find_idx(dir, &format!("{prefix}-images-idx3-ubyte"))?;
    let lbl_path = find_idx(dir, &format!("{prefix}-labels-idx1-ubyte"))?;
    let images = parse_idx_images(
        &img_path.display().to_string(),
        &read_maybe_gz(&img_path)?,
        count,
    )?;
    let labels = parse_idx_labels(
        &lbl_path.display().to_string(),
        &read_maybe_gz(&lbl_path)?,
        count,
    )?;
    if images.rows != MNIST_SIDE || images.cols != MNIST_SIDE {
        return Err(Error::Format {
            file: img_path.display().to_string(),
            offset: 8,
            msg: format!("expected 28x28 images, got {}x{}", images.rows, images.cols),
        });
    }
    if labels.len() != images.len() {
        return Err(Error::Format {
            file: lbl_path.display().to_string(),
            offset: 4,
            msg: format!("{} labels for {} images", labels.len(), images.len()),
        });
    }
    let scenes = (0..images.len())
        .map(|i| resize_to_scene(&binarize_mnist(images.image(i)), labels[i], Style::Handwriting))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(scenes, split)
}

/// Nearest-neighbor upscale of a 28×28 binary image to 54 rows, centered on
/// the 98-column canvas with zero margins.
pub fn resize_to_scene(img: &[u8], label: u8, style: Style) -> Result<Scene> {
    if img.len() != MNIST_SIDE * MNIST_SIDE {
        return Err(Error::DimensionMismatch(format!(
            "expected a 28x28 image, got {} pixels",
            img.len()
        )));
    }
    if img.iter().any(|&p| p > 1) {
        return Err(Error::InvalidScene("resize input must be binary".into()));
    }
    let side = SCENE_HEIGHT;
    let left = (SCENE_WIDTH - side) / 2;
    let mut out = vec![0u8; SCENE_HEIGHT * SCENE_WIDTH];
    for r in 0..side {
        let sr = nearest_source(r, side, MNIST_SIDE);
        for c in 0..side {
            let sc = nearest_source(c, side, MNIST_SIDE);
            out[r * SCENE_WIDTH + left + c] = img[sr * MNIST_SIDE + sc];
        }
    }
    Scene::new(SCENE_HEIGHT, SCENE_WIDTH, out, label, style)
}

/// Source index for output index `i` under center-aligned nearest-neighbor scaling.
fn nearest_source(i: usize, out_len: usize, in_len: usize) -> usize {
    let s = ((2 * i + 1) * in_len) / (2 * out_len);
    s.min(in_len - 1)
}

/// Seven-segment layout. Order: a (top), b (upper right), c (lower right),
/// d (bottom), e (lower left), f (upper left), g (middle).
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

pub const GLYPH_HEIGHT: usize = 32;
pub const GLYPH_WIDTH: usize = 20;
pub const GLYPH_STROKE: usize = 5;

/// Segment letters lit for digit `d` (`"bc"` for 1).
pub fn segments_of(d: u8) -> Option<String> {
    let lit = SEGMENTS.get(usize::from(d))?;
    Some(
        "abcdefg"
            .chars()
            .zip(lit)
            .filter(|(_, &on)| on)
            .map(|(c, _)| c)
            .collect(),
    )
}

/// Row/column rectangle `(r0, r1, c0, c1)` of a segment inside the glyph box.
fn segment_rect(segment: usize) -> (usize, usize, usize, usize) {
    let (h, w, s) = (GLYPH_HEIGHT, GLYPH_WIDTH, GLYPH_STROKE);
    let mid = (h - s) / 2;
    match segment {
        0 => (0, s, 0, w),
        1 => (0, mid + s, w - s, w),
        2 => (mid, h, w - s, w),
        3 => (h - s, h, 0, w),
        4 => (mid, h, 0, s),
        5 => (0, mid + s, 0, s),
        _ => (mid, mid + s, 0, w),
    }
}

/// Render a centered seven-segment digit occupying ~60% of the scene height.
pub fn make_block_digit(d: u8) -> Result<Scene> {
    let lit = SEGMENTS
        .get(usize::from(d))
        .ok_or_else(|| Error::Usage(format!("block digit must be 0-9, got {d}")))?;
    let top = (SCENE_HEIGHT - GLYPH_HEIGHT) / 2;
    let left = (SCENE_WIDTH - GLYPH_WIDTH) / 2;
    let mut out = vec![0u8; SCENE_HEIGHT * SCENE_WIDTH];
    for (seg, _) in lit.iter().enumerate().filter(|(_, &on)| on) {
        let (r0, r1, c0, c1) = segment_rect(seg);
        for r in r0..r1 {
            for c in c0..c1 {
                out[(top + r) * SCENE_WIDTH + left + c] = 1;
            }
        }
    }
    Scene::new(SCENE_HEIGHT, SCENE_WIDTH, out, d, Style::Block)
}

/// Block digits for each of `digits`.
pub fn block_digits(digits: &[u8]) -> Result<Vec<Scene>> {
    digits.iter().map(|&d| make_block_digit(d)).collect()
}

/// First occurrence of each requested digit in `dataset`, in request order.
pub fn first_of_each(dataset: &Dataset, digits: &[u8]) -> Result<Vec<Scene>> {
    digits
        .iter()
        .map(|&d| {
            dataset
                .scenes()
                .iter()
                .find(|s| s.label == d)
                .cloned()
                .ok_or_else(|| Error::Config(format!("dataset holds no digit {d}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(count: u32, rows: u32, cols: u32, body: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IMAGES_MAGIC, count, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(body);
        v
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = idx_images(1, 2, 2, &[0, 1, 2, 3]);
        bytes[3] = 0x04;
        let err = parse_idx_images("x", &bytes, None).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
        let err = parse_idx_labels("y", &bytes, None).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = idx_images(2, 2, 2, &[0, 1, 2, 3, 4]);
        match parse_idx_images("x", &bytes, None).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 16),
            other => panic!("{other}"),
        }
        assert!(parse_idx_images("x", &bytes, Some(1)).is_ok());
        assert!(parse_idx_images("x", &bytes, Some(3)).is_err());
    }

    #[test]
    fn label_range_checked() {
        let mut v = Vec::new();
        v.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&3u32.to_be_bytes());
        v.extend_from_slice(&[1, 12, 3]);
        assert!(parse_idx_labels("l", &v, None).is_err());
        assert_eq!(parse_idx_labels("l", &v, Some(1)).unwrap(), vec![1]);
    }

    #[test]
    fn block_one_is_right_column() {
        assert_eq!(segments_of(1).unwrap(), "bc");
        let one = make_block_digit(1).unwrap();
        let eight = make_block_digit(8).unwrap();
        assert!(eight.open_count() > one.open_count());
        for i in one.open_indices() {
            assert!(eight.is_open(i));
        }
        let left = (SCENE_WIDTH - GLYPH_WIDTH) / 2;
        for i in one.open_indices() {
            let c = i % SCENE_WIDTH;
            assert!(c >= left + GLYPH_WIDTH - GLYPH_STROKE && c < left + GLYPH_WIDTH);
        }
        assert_eq!(one.open_count(), GLYPH_HEIGHT * GLYPH_STROKE);
    }

    #[test]
    fn block_digits_distinct_and_valid() {
        let all = block_digits(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        for (i, a) in all.iter().enumerate() {
            assert!(a.open_count() > 0 && a.open_count() < a.pixels());
            for b in &all[i + 1..] {
                assert_ne!(a.transmission(), b.transmission());
            }
        }
        assert!(make_block_digit(10).is_err());
    }

    #[test]
    fn glyph_height_near_sixty_percent() {
        let eight = make_block_digit(8).unwrap();
        let rows: Vec<usize> = eight.open_indices().iter().map(|i| i / SCENE_WIDTH).collect();
        let span = rows.iter().max().unwrap() - rows.iter().min().unwrap() + 1;
        let frac = span as f64 / SCENE_HEIGHT as f64;
        assert!((0.55..=0.65).contains(&frac), "{frac}");
    }

    #[test]
    fn resize_rejects_empty_and_nonbinary() {
        let zeros = vec![0u8; 784];
        assert!(matches!(
            resize_to_scene(&zeros, 0, Style::Handwriting),
            Err(Error::InvalidScene(_))
        ));
        let mut gray = vec![0u8; 784];
        gray[5] = 7;
        assert!(resize_to_scene(&gray, 0, Style::Handwriting).is_err());
    }

    #[test]
    fn resize_passes_label_and_style() {
        let mut img = vec![0u8; 784];
        img[14 * 28 + 14] = 1;
        let s = resize_to_scene(&img, 7, Style::Block).unwrap();
        assert_eq!((s.label, s.style), (7, Style::Block));
    }

    #[test]
    fn nearest_source_covers_input() {
        let mut seen = [false; 28];
        for i in 0..54 {
            seen[nearest_source(i, 54, 28)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
