//! Binary containers for pattern stacks, reconstructed images and training
//! corpora. Byte layouts are documented in `docs/formats.md`.

use std::fs;
use std::path::Path;

use crate::data::{Scene, Style};
use crate::recon::{ReconImage, Source};
use crate::speckle::{Family, PatternSpec, PatternStack};
use crate::{Error, Result};

pub const STACK_MAGIC: &[u8; 8] = b"CGISTACK";
pub const RECON_MAGIC: &[u8; 8] = b"CGIRECON";
pub const CORPUS_MAGIC: &[u8; 8] = b"CGICORPS";
pub const CONTAINER_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 8]) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(magic);
        w.0.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} exceeds u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    file: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(file: &'a str, bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        let mut r = Reader { file, bytes, pos: 0 };
        if r.take(8)? != magic {
            return Err(r.err_at(0, format!("expected magic {}", String::from_utf8_lossy(magic))));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(Error::Version {
                what: "container",
                found: u32::from(version),
                expected: u32::from(CONTAINER_VERSION),
            });
        }
        Ok(r)
    }
    fn err_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Format {
            file: self.file.to_string(),
            offset: offset as u64,
            msg: msg.into(),
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err_at(
                self.pos,
                format!("need {n} bytes, {} remain", self.bytes.len() - self.pos),
            )),
        }
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.err_at(self.pos, "size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn dims(&mut self) -> Result<(usize, usize, usize)> {
        let at = self.pos;
        let (h, w, n) = (self.u32()?, self.u32()?, self.u32()?);
        if h == 0 || w == 0 {
            return Err(self.err_at(at, format!("empty {h}x{w} grid")));
        }
        Ok((h, w, n))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err_at(self.pos, "trailing bytes"));
        }
        Ok(())
    }
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn spec_header(w: &mut Writer, spec: &PatternSpec) -> Result<()> {
    w.u32(spec.height)?;
    w.u32(spec.width)?;
    w.u32(spec.count)?;
    w.u8(spec.family.code());
    w.u64(spec.seed);
    w.u8(spec.binarize as u8);
    Ok(())
}

fn read_spec(r: &mut Reader) -> Result<PatternSpec> {
    let (height, width, count) = r.dims()?;
    let at = r.pos;
    let family = Family::from_code(r.u8()?).ok_or_else(|| r.err_at(at, "unknown pattern family"))?;
    let seed = r.u64()?;
    let at = r.pos;
    let binarize = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(r.err_at(at, format!("binarize flag {b}"))),
    };
    Ok(PatternSpec {
        height,
        width,
        count,
        family,
        seed,
        binarize,
    })
}

pub fn stack_to_bytes(stack: &PatternStack) -> Result<Vec<u8>> {
    let mut w = Writer::new(STACK_MAGIC);
    spec_header(&mut w, stack.spec())?;
    w.f32s(stack.as_slice());
    Ok(w.0)
}

pub fn stack_from_bytes(file: &str, bytes: &[u8]) -> Result<PatternStack> {
    let mut r = Reader::open(file, bytes, STACK_MAGIC)?;
    let spec = read_spec(&mut r)?;
    let data = r.f32s(spec.count * spec.pixels())?;
    r.finish()?;
    PatternStack::from_raw(spec, data)
}

pub fn write_stack(path: &Path, stack: &PatternStack) -> Result<()> {
    write_file(path, &stack_to_bytes(stack)?)
}

pub fn read_stack(path: &Path) -> Result<PatternStack> {
    stack_from_bytes(&file_name(path), &fs::read(path)?)
}

/// Images must share one grid.
pub fn recons_to_bytes(images: &[ReconImage]) -> Result<Vec<u8>> {
    let (h, w) = images.first().map_or((1, 1), |g| (g.height, g.width));
    let mut out = Writer::new(RECON_MAGIC);
    out.u32(h)?;
    out.u32(w)?;
    out.u32(images.len())?;
    for g in images {
        if (g.height, g.width) != (h, w) {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} in a {h}x{w} set",
                g.height, g.width
            )));
        }
        out.f64(g.beta);
        out.u8(g.source.code());
        out.f32s(&g.g);
    }
    Ok(out.0)
}

pub fn recons_from_bytes(file: &str, bytes: &[u8]) -> Result<Vec<ReconImage>> {
    let mut r = Reader::open(file, bytes, RECON_MAGIC)?;
    let (h, w, n) = r.dims()?;
    let mut images = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let beta = r.f64()?;
        let at = r.pos;
        let source = Source::from_code(r.u8()?).ok_or_else(|| r.err_at(at, "unknown image source"))?;
        images.push(ReconImage::new(h, w, r.f32s(h * w)?, beta, source)?);
    }
    r.finish()?;
    Ok(images)
}

pub fn write_recons(path: &Path, images: &[ReconImage]) -> Result<()> {
    write_file(path, &recons_to_bytes(images)?)
}

pub fn read_recons(path: &Path) -> Result<Vec<ReconImage>> {
    recons_from_bytes(&file_name(path), &fs::read(path)?)
}

/// One training pair as stored: the scene and its raw reconstruction. The
/// ground truth is rebuilt from these on load.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPair {
    pub scene: Scene,
    pub recon: ReconImage,
}

/// A training corpus together with the stack and noise it was simulated with.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub patterns: PatternSpec,
    pub snr_db: Option<f64>,
    pub pairs: Vec<CorpusPair>,
}

fn style_code(s: Style) -> u8 {
    match s {
        Style::Handwriting => 0,
        Style::Block => 1,
    }
}

pub fn corpus_to_bytes(corpus: &Corpus) -> Result<Vec<u8>> {
    let mut w = Writer::new(CORPUS_MAGIC);
    spec_header(&mut w, &corpus.patterns)?;
    w.f64(corpus.snr_db.unwrap_or(f64::INFINITY));
    w.u32(corpus.pairs.len())?;
    let pixels = corpus.patterns.pixels();
    for p in &corpus.pairs {
        if p.scene.pixels() != pixels || p.recon.g.len() != pixels {
            return Err(Error::DimensionMismatch("corpus pair off the pattern grid".into()));
        }
        w.u8(p.scene.label);
        w.u8(style_code(p.scene.style));
        w.0.extend_from_slice(p.scene.transmission());
        w.f32s(&p.recon.g);
    }
    Ok(w.0)
}

pub fn corpus_from_bytes(file: &str, bytes: &[u8]) -> Result<Corpus> {
    let mut r = Reader::open(file, bytes, CORPUS_MAGIC)?;
    let patterns = read_spec(&mut r)?;
    let snr = r.f64()?;
    let n = r.u32()?;
    let (h, w) = (patterns.height, patterns.width);
    let beta = crate::recon::beta_for(patterns.count.max(1), h, w)?;
    let mut pairs = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let label = r.u8()?;
        let at = r.pos;
        let style = match r.u8()? {
            0 => Style::Handwriting,
            1 => Style::Block,
            s => return Err(r.err_at(at, format!("unknown style {s}"))),
        };
        let at = r.pos;
        let t = r.take(h * w)?.to_vec();
        let scene = Scene::new(h, w, t, label, style)
            .map_err(|e| r.err_at(at, format!("bad scene: {e}")))?;
        let recon = ReconImage::new(h, w, r.f32s(h * w)?, beta, Source::RawCgi)?;
        pairs.push(CorpusPair { scene, recon });
    }
    r.finish()?;
    Ok(Corpus {
        patterns,
        snr_db: (snr != f64::INFINITY).then_some(snr),
        pairs,
    })
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_file(path, &corpus_to_bytes(corpus)?)
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    corpus_from_bytes(&file_name(path), &fs::read(path)?)
}
