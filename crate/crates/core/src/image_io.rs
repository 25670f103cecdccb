//! 8-bit grayscale export (PNG and binary PGM) and tiled figure grids.
//! Every image is min-max scaled to the full gray range for display.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Min-max scale to `0..=255`; constant images become black.
pub fn to_gray8(values: &[f32]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect()
}

fn check(height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    if height == 0 || width == 0 || pixels.len() != height * width {
        return Err(Error::DimensionMismatch(format!(
            "{height}x{width} image with {} pixels",
            pixels.len()
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_pgm(path: &Path, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    check(height, width, pixels)?;
    let mut w = create(path)?;
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

pub fn write_png(path: &Path, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    check(height, width, pixels)?;
    let (w32, h32) = (width as u32, height as u32);
    let mut enc = png::Encoder::new(create(path)?, w32, h32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(pixels).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

/// A figure canvas of equally sized tiles separated by white gutters.
#[derive(Debug, Clone)]
pub struct Grid {
    rows: usize,
    cols: usize,
    tile_h: usize,
    tile_w: usize,
    gap: usize,
    pixels: Vec<u8>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, tile_h: usize, tile_w: usize, gap: usize) -> Self {
        let (h, w) = (
            rows * tile_h + (rows + 1) * gap,
            cols * tile_w + (cols + 1) * gap,
        );
        Grid {
            rows,
            cols,
            tile_h,
            tile_w,
            gap,
            pixels: vec![255; h * w],
        }
    }

    pub fn height(&self) -> usize {
        self.rows * self.tile_h + (self.rows + 1) * self.gap
    }

    pub fn width(&self) -> usize {
        self.cols * self.tile_w + (self.cols + 1) * self.gap
    }

    /// Place `values` (display-normalized) at tile `(row, col)`.
    pub fn put(&mut self, row: usize, col: usize, values: &[f32]) -> Result<()> {
        if row >= self.rows || col >= self.cols || values.len() != self.tile_h * self.tile_w {
            return Err(Error::DimensionMismatch(format!(
                "tile ({row}, {col}) with {} values on a {}x{} grid of {}x{} tiles",
                values.len(),
                self.rows,
                self.cols,
                self.tile_h,
                self.tile_w
            )));
        }
        let gray = to_gray8(values);
        let width = self.width();
        let top = self.gap + row * (self.tile_h + self.gap);
        let left = self.gap + col * (self.tile_w + self.gap);
        for (y, line) in gray.chunks_exact(self.tile_w).enumerate() {
            let start = (top + y) * width + left;
            self.pixels[start..start + self.tile_w].copy_from_slice(line);
        }
        Ok(())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_png(path, self.height(), self.width(), &self.pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_scaling() {
        assert_eq!(to_gray8(&[-1.0, 0.0, 1.0]), vec![0, 128, 255]);
        assert_eq!(to_gray8(&[3.0, 3.0]), vec![0, 0]);
    }

    #[test]
    fn pgm_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, 1, 2, &[7, 9]).unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"P5\n2 1\n255\n\x07\x09");
        assert!(write_pgm(&p, 2, 2, &[1]).is_err());
    }

    #[test]
    fn grid_places_tiles() {
        let mut g = Grid::new(1, 2, 1, 2, 1);
        g.put(0, 1, &[0.0, 1.0]).unwrap();
        assert_eq!((g.height(), g.width()), (3, 7));
        assert_eq!(&g.pixels[7..14], &[255, 255, 255, 255, 0, 255, 255]);
        assert!(g.put(1, 0, &[0.0, 1.0]).is_err());
    }
}
