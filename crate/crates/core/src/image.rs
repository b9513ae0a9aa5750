//! 8-bit RGB frames.

use crate::error::{ImrlError, Result};

/// Row-major, interleaved RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut img = RgbImage::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&color);
        }
        img
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(ImrlError::Shape(format!(
                "{width}×{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| ImrlError::Format {
            what: "ppm",
            message: m.to_string(),
        };
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
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("expected P6 with maxval 255"));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimensions"));
        let (w, h) = (dim(fields[1])?, dim(fields[2])?);
        RgbImage::from_raw(w, h, bytes.get(pos + 1..).unwrap_or_default().to_vec())
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Pixel values scaled to `[0, 1]`, interleaved.
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v) / 255.0).collect()
    }

    /// Appends the `[0, 1]`-scaled pixels to `out`.
    pub fn extend_unit(&self, out: &mut Vec<f64>) {
        out.extend(self.data.iter().map(|&v| f64::from(v) / 255.0));
    }

    /// 2×2 box downsampling; odd trailing rows/columns are dropped.
    pub fn downsample2(&self) -> RgbImage {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut out = RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0u32; 3];
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let p = self.get(2 * x + dx, 2 * y + dy);
                    for c in 0..3 {
                        acc[c] += u32::from(p[c]);
                    }
                }
                out.put(x, y, acc.map(|v| ((v + 2) / 4) as u8));
            }
        }
        out
    }

    /// Nearest-neighbour resample of the square `side×side` window whose
    /// top-left corner is `(x0, y0)` (may extend past the frame; outside
    /// pixels are zero) into an `out×out` image.
    pub fn crop_resize(&self, x0: f64, y0: f64, side: f64, out: usize) -> RgbImage {
        let mut img = RgbImage::new(out, out);
        let step = side / out as f64;
        for oy in 0..out {
            let sy = (y0 + (oy as f64 + 0.5) * step).floor();
            for ox in 0..out {
                let sx = (x0 + (ox as f64 + 0.5) * step).floor();
                if sx >= 0.0 && sy >= 0.0 && (sx as usize) < self.width && (sy as usize) < self.height {
                    img.put(ox, oy, self.get(sx as usize, sy as usize));
                }
            }
        }
        img
    }

    pub fn flip_horizontal(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.put(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// 3×3 box blur with edge clamping.
    pub fn box_blur3(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        let (w, h) = (self.width as isize, self.height as isize);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0u32; 3];
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let sy = (y + dy).clamp(0, h - 1) as usize;
                        let p = self.get(sx, sy);
                        for c in 0..3 {
                            acc[c] += u32::from(p[c]);
                        }
                    }
                }
                out.put(x as usize, y as usize, acc.map(|v| ((v + 4) / 9) as u8));
            }
        }
        out
    }

    /// Adds a per-channel offset, saturating.
    pub fn jitter(&self, offset: [i32; 3]) -> RgbImage {
        let mut out = self.clone();
        for px in out.data.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = (i32::from(px[c]) + offset[c]).clamp(0, 255) as u8;
            }
        }
        out
    }
}
