use super::BinaryMask;

/// Summed-area table with a zero top row and left column:
/// `table[(y+1)(w+1) + (x+1)]` counts food pixels in `[0,x] × [0,y]`.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<u32>,
}

pub fn integral_image(mask: &BinaryMask) -> IntegralImage {
    let (w, h) = (mask.width(), mask.height());
    let stride = w + 1;
    let mut table = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(mask.get(x, y));
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }
    IntegralImage {
        width: w,
        height: h,
        table,
    }
}

impl IntegralImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Food count in the inclusive rectangle `[x0,x1] × [y0,y1]`, clipped to
    /// the image. Empty after clipping gives 0.
    pub fn box_sum(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> u32 {
        let (l, t) = (x0.max(0), y0.max(0));
        let r = x1.min(self.width as i64 - 1);
        let b = y1.min(self.height as i64 - 1);
        if l > r || t > b {
            return 0;
        }
        let stride = self.width + 1;
        let at = |x: i64, y: i64| self.table[y as usize * stride + x as usize];
        at(r + 1, b + 1) + at(l, t) - at(r + 1, t) - at(l, b + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_single_pixel_sums() {
        let ones = BinaryMask::from_fn(4, 4, |_, _| true).unwrap();
        assert_eq!(integral_image(&ones).box_sum(0, 0, 3, 3), 16);
        assert_eq!(integral_image(&ones).box_sum(-5, -5, 10, 10), 16);

        let single = BinaryMask::from_fn(6, 5, |x, y| (x, y) == (2, 3)).unwrap();
        let ii = integral_image(&single);
        assert_eq!(ii.box_sum(1, 2, 3, 4), 1);
        assert_eq!(ii.box_sum(3, 0, 5, 4), 0);
        assert_eq!(ii.box_sum(4, 4, 2, 2), 0);
    }
}
