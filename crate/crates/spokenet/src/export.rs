//! Viewable renderings of magnitude images: 8-bit PGM, PNG and CSV.
//!
//! Rendered images put +y at the top, so row 0 of the output is the last
//! image row.

use std::path::Path;

use spokenet_core::metrics::XtProfile;
use spokenet_core::DynamicImage;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pgm,
    Png,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Pgm => "pgm",
            Format::Png => "png",
            Format::Csv => "csv",
        }
    }
}

/// Display window mapping `lo` to black and `hi` to white.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// `[0, max]` of the values.
    pub fn auto(values: &[f64]) -> Self {
        Self { lo: 0.0, hi: values.iter().copied().fold(0.0, f64::max) }
    }

    pub fn to_gray(&self, v: f64) -> u8 {
        let span = self.hi - self.lo;
        if !(span > 0.0) || !v.is_finite() {
            return 0;
        }
        ((v - self.lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
    }
}

/// A row-major grayscale raster, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Raster {
    /// Magnitude of one frame, flipped so +y points up.
    pub fn frame(d: &DynamicImage, frame: usize) -> AppResult<Self> {
        if frame >= d.n_frames() {
            return Err(AppError::Config(format!("frame {frame} out of range (image has {} frames)", d.n_frames())));
        }
        let (nx, ny) = (d.grid.nx, d.grid.ny);
        let data = d.frame(frame);
        let values = (0..ny).rev().flat_map(|iy| data[iy * nx..(iy + 1) * nx].iter().map(|z| z.norm())).collect();
        Ok(Self { width: nx, height: ny, values })
    }

    /// x across, time downwards.
    pub fn xt(p: &XtProfile) -> Self {
        let values = (0..p.n_frames).flat_map(|t| (0..p.nx).map(move |x| p.at(x, t))).collect();
        Self { width: p.nx, height: p.n_frames, values }
    }

    pub fn gray8(&self, window: Window) -> Vec<u8> {
        self.values.iter().map(|&v| window.to_gray(v)).collect()
    }

    pub fn encode(&self, format: Format, window: Window) -> AppResult<Vec<u8>> {
        match format {
            Format::Pgm => Ok(encode_pgm(self.width, self.height, &self.gray8(window))),
            Format::Png => encode_png(self.width, self.height, &self.gray8(window)),
            Format::Csv => Ok(self.csv()),
        }
    }

    /// Raw magnitudes, one row per line.
    pub fn csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in self.values.chunks(self.width.max(1)) {
            w.write_record(row.iter().map(|v| v.to_string())).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }

    pub fn write(&self, path: &Path, format: Format, window: Window) -> AppResult<()> {
        let bytes = self.encode(format, window)?;
        std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
    }
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses the binary PGM variant written by [`encode_pgm`].
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "PGM header is not ASCII")?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(format!("unsupported PGM header {fields:?}"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PGM dimension `{s}`"));
    let (w, h) = (parse(fields[1])?, parse(fields[2])?);
    let data = &bytes[(pos + 1).min(bytes.len())..];
    if data.len() != w * h {
        return Err(format!("PGM payload has {} bytes, expected {}", data.len(), w * h));
    }
    Ok((w, h, data.to_vec()))
}

pub fn encode_png(width: usize, height: usize, pixels: &[u8]) -> AppResult<Vec<u8>> {
    let err = |e: png::EncodingError| AppError::format("<png>", e.to_string());
    let dims = |v: usize| u32::try_from(v).map_err(|_| AppError::format("<png>", "image too large"));
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, dims(width)?, dims(height)?);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(err)?;
        w.write_image_data(pixels).map_err(err)?;
    }
    Ok(out)
}
