use super::BinaryMask;
use crate::error::{ImrlError, Result};

/// Euclidean distance from each food pixel to the nearest boundary pixel.
/// Non-food pixels hold 0.
#[derive(Clone, Debug)]
pub struct DistanceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A food pixel is on the boundary when one of its 4-neighbours is non-food
/// or lies outside the image.
pub fn is_boundary(mask: &BinaryMask, x: usize, y: usize) -> bool {
    if !mask.get(x, y) {
        return false;
    }
    let (x, y) = (x as i64, y as i64);
    [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
        .iter()
        .any(|&(nx, ny)| !mask.get_signed(nx, ny))
}

/// Lower envelope of parabolas `f[q] + (p − q)²` over the finite samples of
/// `f`, evaluated at every integer `p`.
fn squared_distance_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut v = Vec::with_capacity(sites.len());
    let mut z = Vec::with_capacity(sites.len() + 1);
    let intersect = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    v.push(sites[0]);
    z.push(f64::NEG_INFINITY);
    for &q in &sites[1..] {
        let mut s = intersect(q, *v.last().expect("nonempty"));
        while s <= *z.last().expect("nonempty") {
            v.pop();
            z.pop();
            s = intersect(q, *v.last().expect("envelope keeps its first site"));
        }
        v.push(q);
        z.push(s);
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while k + 1 < v.len() && z[k + 1] < pf {
            k += 1;
        }
        let d = pf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance transform to the mask boundary, computed as a
/// row pass followed by a column pass over squared distances.
pub fn boundary_distance(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(ImrlError::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let mut sq = vec![f64::INFINITY; w * h];
    for y in 0..h {
        for x in 0..w {
            if is_boundary(mask, x, y) {
                sq[y * w + x] = 0.0;
            }
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        squared_distance_1d(&sq[y * w..(y + 1) * w], &mut row_out);
        sq[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = sq[y * w + x];
        }
        squared_distance_1d(&col, &mut col_out);
        for y in 0..h {
            sq[y * w + x] = col_out[y];
        }
    }
    let values = sq
        .iter()
        .zip(mask.cells())
        .map(|(&d, &c)| if c == 1 { d.sqrt() } else { 0.0 })
        .collect();
    Ok(DistanceField {
        width: w,
        height: h,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_pixels_are_zero() {
        let m = BinaryMask::from_fn(6, 6, |x, y| (1..5).contains(&x) && (1..5).contains(&y)).unwrap();
        let d = boundary_distance(&m).unwrap();
        assert_eq!(d.get(1, 1), 0.0);
        assert_eq!(d.get(4, 2), 0.0);
        assert_eq!(d.get(2, 2), 1.0);
    }

    #[test]
    fn center_of_five_block_is_two() {
        let m = BinaryMask::from_fn(11, 11, |x, y| (3..8).contains(&x) && (3..8).contains(&y)).unwrap();
        let d = boundary_distance(&m).unwrap();
        assert_eq!(d.get(5, 5), 2.0);
        assert_eq!(d.get(4, 4), 1.0);
    }

    #[test]
    fn image_edge_counts_as_exterior() {
        let m = BinaryMask::from_fn(5, 5, |_, _| true).unwrap();
        let d = boundary_distance(&m).unwrap();
        assert_eq!(d.get(0, 2), 0.0);
        assert_eq!(d.get(2, 2), 2.0);
        assert_eq!(d.get(1, 1), 1.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BinaryMask::new(3, 3).unwrap();
        assert!(matches!(boundary_distance(&m), Err(ImrlError::EmptyMask)));
    }
}
