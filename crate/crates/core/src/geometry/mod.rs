//! Binary-mask geometry behind the scooping-point search: centroid, local
//! food density, distance to the mask boundary and the margin-constrained
//! density maximiser.

mod density;
mod distance;
mod integral;
mod mask;
mod scoop;
mod segment;

pub use density::{local_density, DensityMap};
pub use distance::{boundary_distance, is_boundary, DistanceField};
pub use integral::{integral_image, IntegralImage};
pub use mask::{centroid, BinaryMask};
pub use scoop::{optimal_scoop_point, ScoopPoint};
pub use segment::threshold_segment;
