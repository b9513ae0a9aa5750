use std::fmt::Write as _;

use crate::error::{ImrlError, Result};

/// `width × height` grid of food (1) / non-food (0) pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImrlError::Shape(format!(
                "mask must be at least 1×1, got {width}×{height}"
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            cells: vec![0; width * height],
        })
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        let mut mask = BinaryMask::new(width, height)?;
        if cells.len() != width * height {
            return Err(ImrlError::Shape(format!(
                "{width}×{height} mask needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c > 1) {
            return Err(ImrlError::format("mask", format!("non-binary cell value {bad}")));
        }
        mask.cells = cells;
        Ok(mask)
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut mask = BinaryMask::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                mask.cells[y * width + x] = u8::from(f(x, y));
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x] == 1
    }

    /// Like `get`, but out-of-frame coordinates read as non-food.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, food: bool) {
        self.cells[y * self.width + x] = u8::from(food);
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&c| c == 0)
    }

    /// Food pixel coordinates in row-major order.
    pub fn food_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 1)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Plain-text PGM (`P2`, maxval 1).
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n1\n", self.width, self.height);
        for row in self.cells.chunks_exact(self.width) {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                write!(s, "{c}").expect("writing to a String cannot fail");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_pgm(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| ImrlError::format("PGM", format!("missing {what}")))
        };
        if next("magic")? != "P2" {
            return Err(ImrlError::format("PGM", "expected plain-text P2 magic"));
        }
        let parse = |tok: &str, what: &str| {
            tok.parse::<usize>()
                .map_err(|_| ImrlError::format("PGM", format!("bad {what} `{tok}`")))
        };
        let width = parse(next("width")?, "width")?;
        let height = parse(next("height")?, "height")?;
        let maxval = parse(next("maxval")?, "maxval")?;
        if maxval != 1 {
            return Err(ImrlError::format("PGM", format!("mask maxval must be 1, got {maxval}")));
        }
        let mut cells = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let v = parse(next("pixel")?, "pixel")?;
            if v > 1 {
                return Err(ImrlError::format("PGM", format!("pixel value {v} exceeds maxval")));
            }
            cells.push(v as u8);
        }
        if tokens.next().is_some() {
            return Err(ImrlError::format("PGM", "trailing data after pixels"));
        }
        BinaryMask::from_cells(width, height, cells)
    }
}

/// Mean coordinate of the food pixels.
pub fn centroid(mask: &BinaryMask) -> Result<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in mask.food_pixels() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(ImrlError::EmptyMask);
    }
    Ok((sx as f64 / n as f64, sy as f64 / n as f64))
}
