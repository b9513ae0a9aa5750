use serde::{Deserialize, Serialize};

/// Physical constants of the scooping rules. Depth is the third pose
/// coordinate; larger is deeper.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    /// Depth of the bowl rim; the spoon is "in" the bowl below this.
    pub rim_depth: f64,
    pub floor_depth: f64,
    /// Penetration below the food surface needed to pick anything up.
    pub min_penetration: f64,
    /// Minimum horizontal travel while submerged that counts as a sweep.
    pub sweep_min: f64,
    pub spoon_radius_px: f64,
    /// Penetration at which a granular scoop is full.
    pub granular_full_penetration: f64,
    pub granular_capacity: f64,
    /// Granular food spills when |tilt| exceeds this while loaded.
    pub granular_tilt_limit: f64,
    pub liquid_capacity: f64,
    /// Liquid spills when the loaded spoon moves horizontally faster than
    /// this per step.
    pub liquid_spill_speed: f64,
    /// Liquid spills unless the spoon is cupped (tilt at or below this).
    pub liquid_tilt_max: f64,
    pub semi_solid_capacity: f64,
    pub chunk_depth: f64,
    /// Cutting a semi-solid chunk needs at least this much tilt.
    pub semi_solid_tilt_min: f64,
    pub solid_item_volume: f64,
    pub solid_item_radius_px: f64,
    pub solid_max_items: usize,
    pub mixture_item_bonus: f64,
    pub mixture_item_radius_px: f64,
    pub mixture_max_items: usize,
    /// Delivered amount at or above which an attempt succeeds.
    pub success_threshold: f64,
    pub attempt_steps: usize,
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics {
            rim_depth: -0.2,
            floor_depth: 0.6,
            min_penetration: 0.05,
            sweep_min: 0.02,
            spoon_radius_px: 2.0,
            granular_full_penetration: 0.1,
            granular_capacity: 0.04,
            granular_tilt_limit: 0.3,
            liquid_capacity: 0.035,
            liquid_spill_speed: 0.15,
            liquid_tilt_max: -0.3,
            semi_solid_capacity: 0.03,
            chunk_depth: 0.2,
            semi_solid_tilt_min: 0.3,
            solid_item_volume: 0.04,
            solid_item_radius_px: 5.5,
            solid_max_items: 10,
            mixture_item_bonus: 0.01,
            mixture_item_radius_px: 2.5,
            mixture_max_items: 8,
            success_threshold: 0.02,
            attempt_steps: 8,
        }
    }
}

impl Dynamics {
    /// Depth of the food surface at fill level `fill`.
    pub fn surface_depth(&self, fill: f64) -> f64 {
        self.floor_depth - (self.floor_depth - self.rim_depth) * fill
    }
}
