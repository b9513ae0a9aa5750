use super::{integral_image, BinaryMask};
use crate::error::{ImrlError, Result};

/// Fraction of food pixels in the `r×r` window around each pixel. The window
/// is clipped at the image border and the divisor is the clipped window's
/// pixel count, so every value is a true proportion. Counts and areas are
/// kept as integers so comparisons are exact.
#[derive(Clone, Debug)]
pub struct DensityMap {
    width: usize,
    height: usize,
    window: usize,
    counts: Vec<u32>,
    areas: Vec<u32>,
}

impl DensityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `(food count, window area)` at a pixel.
    pub fn ratio(&self, x: usize, y: usize) -> (u32, u32) {
        let i = y * self.width + x;
        (self.counts[i], self.areas[i])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        let (c, a) = self.ratio(x, y);
        f64::from(c) / f64::from(a)
    }
}

pub(crate) fn check_window(r: usize) -> Result<()> {
    if r == 0 || r.is_multiple_of(2) {
        return Err(ImrlError::config(
            "density_radius",
            format!("window side must be odd and >= 1, got {r}"),
        ));
    }
    Ok(())
}

pub fn local_density(mask: &BinaryMask, r: usize) -> Result<DensityMap> {
    check_window(r)?;
    let ii = integral_image(mask);
    let (w, h) = (mask.width(), mask.height());
    let half = (r / 2) as i64;
    let mut counts = Vec::with_capacity(w * h);
    let mut areas = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        let (t, b) = ((y - half).max(0), (y + half).min(h as i64 - 1));
        for x in 0..w as i64 {
            let (l, rr) = ((x - half).max(0), (x + half).min(w as i64 - 1));
            counts.push(ii.box_sum(l, t, rr, b));
            areas.push(((rr - l + 1) * (b - t + 1)) as u32);
        }
    }
    Ok(DensityMap {
        width: w,
        height: h,
        window: r,
        counts,
        areas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_interior() {
        let m = BinaryMask::from_fn(7, 7, |_, _| true).unwrap();
        assert_eq!(local_density(&m, 3).unwrap().get(3, 3), 1.0);
    }

    #[test]
    fn lone_pixel_interior_and_corner() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (x, y) == (3, 3)).unwrap();
        let d = local_density(&m, 3).unwrap();
        assert_eq!(d.ratio(3, 3), (1, 9));
        assert!((d.get(3, 3) - 1.0 / 9.0).abs() < 1e-15);

        let m = BinaryMask::from_fn(7, 7, |x, y| (x, y) == (0, 0)).unwrap();
        let d = local_density(&m, 3).unwrap();
        assert_eq!(d.ratio(0, 0), (1, 4));
        assert_eq!(d.get(0, 0), 0.25);
    }

    #[test]
    fn window_must_be_odd_positive() {
        let m = BinaryMask::new(3, 3).unwrap();
        assert!(matches!(local_density(&m, 4), Err(ImrlError::Config { .. })));
        assert!(matches!(local_density(&m, 0), Err(ImrlError::Config { .. })));
        assert!(local_density(&m, 1).is_ok());
    }
}
