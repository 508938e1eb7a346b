//! Portable graymap (PGM) reading and writing.
//!
//! Both the plain (`P2`) and raw (`P5`) variants are read, with 8- or 16-bit
//! samples. Writing always produces raw `P5` with a minimal header, so a file
//! written here reads back and rewrites byte for byte.
//!
//! Images map to 2D tensors with shape `[height, width]`: tensor index
//! `[row, col]` is pixel `(row, col)` counted from the top-left corner.

use std::path::Path;

use crate::error::{structural, Error, Result};
use crate::tensor::{DenseTensor, TensorShape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, `height * width` of them.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(structural("image dimensions must be positive"));
        }
        if maxval == 0 {
            return Err(structural("maxval must be positive"));
        }
        if pixels.len() != width * height {
            return Err(structural(format!("expected {} pixels, got {}", width * height, pixels.len())));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(structural(format!("pixel value {p} exceeds maxval {maxval}")));
        }
        Ok(Self { width, height, maxval, pixels })
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    pub fn shape(&self) -> TensorShape {
        TensorShape::new(vec![self.height, self.width]).expect("dimensions are positive")
    }

    /// Binary mask: pixels brighter than half of maxval become `level`, the rest 0.
    pub fn to_mask(&self, level: f64) -> DenseTensor {
        DenseTensor::from_fn(self.shape(), |ix| if 2 * u32::from(self.get(ix[0], ix[1])) > u32::from(self.maxval) { level } else { 0.0 })
            .expect("mask values are finite")
    }
}

fn input_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Input { offset, message: message.into() }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' && self.bytes[self.pos] != b'\r' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if start >= self.bytes.len() {
                input_err(start, format!("unexpected end of file, expected {what}"))
            } else {
                input_err(start, format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| input_err(start, format!("{what} out of range")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(input_err(0, "not a portable graymap (expected P2 or P5 magic)"));
    }
    let raw = bytes[1] == b'5';
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(input_err(maxval_at, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(input_err(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let maxval = maxval as u16;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| input_err(maxval_at, "image dimensions overflow"))?;
    let mut pixels = Vec::with_capacity(count);
    if raw {
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(input_err(cur.pos, "expected a single whitespace byte before raster"));
        }
        let start = cur.pos + 1;
        let bps = if maxval > 255 { 2 } else { 1 };
        let needed = count * bps;
        if bytes.len() - start < needed {
            return Err(input_err(bytes.len(), format!("raster truncated: need {needed} bytes, have {}", bytes.len() - start)));
        }
        for k in 0..count {
            let off = start + k * bps;
            let v = if bps == 2 { u16::from_be_bytes([bytes[off], bytes[off + 1]]) } else { u16::from(bytes[off]) };
            if v > maxval {
                return Err(input_err(off, format!("pixel value {v} exceeds maxval {maxval}")));
            }
            pixels.push(v);
        }
    } else {
        for _ in 0..count {
            cur.skip_space();
            let at = cur.pos;
            let v = cur.number("pixel value")?;
            if v > u32::from(maxval) {
                return Err(input_err(at, format!("pixel value {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as u16);
        }
    }
    GrayImage::new(width, height, maxval, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&std::fs::read(path)?)
}

/// Raw `P5` encoding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval > 255 {
        for &p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    } else {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    }
    out
}

/// Linear gray scale shared by a set of rendered tensors.
///
/// The range always includes 0. Values map to `round(255 (x − lo) / (hi − lo))`;
/// a degenerate range (all values 0) renders as uniform mid-gray 128.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayScale {
    pub lo: f64,
    pub hi: f64,
}

impl GrayScale {
    pub fn covering(tensors: &[&DenseTensor]) -> Self {
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for t in tensors {
            for &v in t.values() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Self { lo, hi }
    }

    pub fn level(&self, x: f64) -> u8 {
        if self.hi <= self.lo {
            return 128;
        }
        (255.0 * (x - self.lo) / (self.hi - self.lo)).round().clamp(0.0, 255.0) as u8
    }
}

/// Renders a 2D tensor as an 8-bit image.
pub fn render(t: &DenseTensor, scale: &GrayScale) -> Result<GrayImage> {
    let dims = t.shape().dims();
    if dims.len() != 2 {
        return Err(structural(format!("render needs a 2D tensor, got order {}", dims.len())));
    }
    let (h, w) = (dims[0], dims[1]);
    let mut pixels = vec![0u16; h * w];
    for row in 0..h {
        for col in 0..w {
            pixels[row * w + col] = u16::from(scale.level(t.values()[row + h * col]));
        }
    }
    GrayImage::new(w, h, 255, pixels)
}

/// Per-slice 2D views of a 3D tensor along the last mode.
pub fn slices_3d(t: &DenseTensor) -> Result<Vec<DenseTensor>> {
    let dims = t.shape().dims();
    if dims.len() != 3 {
        return Err(structural(format!("slicing needs a 3D tensor, got order {}", dims.len())));
    }
    let plane = dims[0] * dims[1];
    let shape = TensorShape::new(vec![dims[0], dims[1]])?;
    (0..dims[2])
        .map(|k| DenseTensor::new(shape.clone(), t.values()[k * plane..(k + 1) * plane].to_vec()))
        .collect()
}
