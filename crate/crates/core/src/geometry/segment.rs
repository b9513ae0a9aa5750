use super::BinaryMask;
use crate::image::RgbImage;

/// Marks a pixel as food when every channel is within `tolerance` of
/// `food_color`.
pub fn threshold_segment(frame: &RgbImage, food_color: [u8; 3], tolerance: u8) -> BinaryMask {
    BinaryMask::from_fn(frame.width(), frame.height(), |x, y| {
        let px = frame.get(x, y);
        (0..3).all(|c| px[c].abs_diff(food_color[c]) <= tolerance)
    })
    .expect("frame dimensions are nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_only_gives_empty_mask() {
        let img = RgbImage::filled(8, 8, [10, 200, 30]);
        assert!(threshold_segment(&img, [200, 30, 30], 20).is_empty());
    }

    #[test]
    fn exact_color_with_zero_tolerance() {
        let mut img = RgbImage::filled(6, 6, [0, 0, 0]);
        img.put(2, 3, [100, 120, 140]);
        img.put(4, 1, [100, 120, 140]);
        let exact = threshold_segment(&img, [100, 120, 140], 0);
        let loose = threshold_segment(&img, [100, 120, 140], 5);
        assert_eq!(exact, loose);
        assert_eq!(exact.count(), 2);
    }
}
