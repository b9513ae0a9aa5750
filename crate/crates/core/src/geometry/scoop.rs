use std::cmp::Ordering;
use std::fmt;

use super::density::check_window;
use super::{boundary_distance, centroid, local_density, BinaryMask};
use crate::error::{ImrlError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoopPoint {
    pub x: usize,
    pub y: usize,
    pub density: f64,
    pub boundary_distance: f64,
}

impl fmt::Display for ScoopPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.6} {:.6}",
            self.x, self.y, self.density, self.boundary_distance
        )
    }
}

/// Compares two densities given as `(count, area)` without rounding.
fn cmp_ratio(a: (u32, u32), b: (u32, u32)) -> Ordering {
    (u64::from(a.0) * u64::from(b.1)).cmp(&(u64::from(b.0) * u64::from(a.1)))
}

/// Food pixel of maximal local density among those farther than `margin`
/// from the mask boundary. Ties go to the pixel closest to the centroid,
/// then to the first in row-major order.
pub fn optimal_scoop_point(mask: &BinaryMask, window: usize, margin: f64) -> Result<ScoopPoint> {
    check_window(window)?;
    if !(margin >= 0.0) {
        return Err(ImrlError::config(
            "scoop_margin",
            format!("margin must be >= 0, got {margin}"),
        ));
    }
    if mask.is_empty() {
        return Err(ImrlError::NoFeasiblePoint { margin });
    }
    let density = local_density(mask, window)?;
    let distance = boundary_distance(mask)?;
    let (cx, cy) = centroid(mask)?;
    let centroid_sq = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy
    };

    let mut best: Option<(usize, usize)> = None;
    for (x, y) in mask.food_pixels() {
        if distance.get(x, y) <= margin {
            continue;
        }
        let better = match best {
            None => true,
            Some((bx, by)) => match cmp_ratio(density.ratio(x, y), density.ratio(bx, by)) {
                Ordering::Greater => true,
                Ordering::Less => false,
                // Row-major iteration means an equal centroid distance keeps
                // the earlier pixel.
                Ordering::Equal => centroid_sq(x, y) < centroid_sq(bx, by),
            },
        };
        if better {
            best = Some((x, y));
        }
    }
    let (x, y) = best.ok_or(ImrlError::NoFeasiblePoint { margin })?;
    Ok(ScoopPoint {
        x,
        y,
        density: density.get(x, y),
        boundary_distance: distance.get(x, y),
    })
}
