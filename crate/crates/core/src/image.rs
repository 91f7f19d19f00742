//! Grayscale rasters with intensities in `[0,1]` and binary PGM (P5) I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Row-major grayscale image; pixel `(x, y)` sits at integer coordinates
/// with the origin top-left, `x` rightward and `y` downward.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Outcome of a bilinear lookup.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub value: f64,
    /// The position fell outside the pixel grid and was clamped to the edge.
    pub clamped: bool,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return invalid(format!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x] as f64
    }

    /// Pixel read with coordinates clamped to the image.
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(xc, yc)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation at `(x, y)`; positions outside the grid are
    /// clamped to the border.
    pub fn bilinear(&self, x: f64, y: f64) -> Sample {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        let clamped = !(x >= 0.0 && x <= maxx && y >= 0.0 && y <= maxy);
        let xc = if x.is_nan() { 0.0 } else { x.clamp(0.0, maxx) };
        let yc = if y.is_nan() { 0.0 } else { y.clamp(0.0, maxy) };
        let x0 = xc.floor();
        let y0 = yc.floor();
        let fx = xc - x0;
        let fy = yc - y0;
        let (x0, y0) = (x0 as usize, y0 as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = (1.0 - fx) * self.get(x0, y0) + fx * self.get(x1, y0);
        let bottom = (1.0 - fx) * self.get(x0, y1) + fx * self.get(x1, y1);
        Sample {
            value: (1.0 - fy) * top + fy * bottom,
            clamped,
        }
    }

    /// Rounds every pixel to the nearest 8-bit level.
    pub fn quantize(&self) -> Self {
        self.map(|v| to_level(v) as f32 / 255.0)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| to_level(v)));
        out
    }

    /// Parses a binary PGM with `maxval <= 255`; intensities map to `[0,1]`
    /// by division by 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Data("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(Error::Data(format!("unsupported PGM magic {:?}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Data(format!("bad PGM header field {s:?}")))
        };
        let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Data(format!("unsupported PGM maxval {maxval}")));
        }
        pos += 1; // single whitespace after maxval
        let body = bytes
            .get(pos..pos + w * h)
            .ok_or_else(|| Error::Data("truncated PGM pixel data".into()))?;
        let data = body.iter().map(|&b| b as f32 / maxval as f32).collect();
        Self::new(w, h, data).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm(&std::fs::read(path)?)
    }
}

fn to_level(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
