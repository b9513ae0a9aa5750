use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::catalog::{BowlSpec, FoodSpec, PropertyClass, FRAME};
use super::dynamics::Dynamics;
use crate::error::{ImrlError, Result};
use crate::geometry::BinaryMask;
use crate::seed;

/// Pose layout: `[x, y, depth, tilt, sweep_phase, spare]`, each in `[-1, 1]`.
pub type Pose = [f64; 6];

pub const X: usize = 0;
pub const Y: usize = 1;
pub const DEPTH: usize = 2;
pub const TILT: usize = 3;
pub const PHASE: usize = 4;

/// Resting pose between attempts, clear of the bowl and above the rim.
pub const HOME: Pose = [-0.9, -0.9, -0.6, 0.0, -1.0, 0.0];

/// Normalised coordinate to pixel coordinate.
pub fn to_pixel(v: f64) -> f64 {
    (v + 1.0) * 0.5 * (FRAME - 1) as f64
}

/// Pixel coordinate to normalised coordinate.
pub fn from_pixel(p: f64) -> f64 {
    p / (FRAME - 1) as f64 * 2.0 - 1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Food removed from the bowl during this step.
    pub scooped_amount: f64,
    pub spilled: bool,
    pub collided_with_bowl: bool,
    /// Set on the step that closes an attempt.
    pub attempt: Option<AttemptOutcome>,
}

/// Result of one scooping attempt. `scooped_amount` is what was delivered:
/// zero when the load spilled, the spoon hit the bowl, or the spoon ended
/// the attempt below the rim.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub scooped_amount: f64,
    pub spilled: bool,
    pub collided_with_bowl: bool,
}

/// Where the food sits in the frame at the current fill level.
#[derive(Clone, Debug)]
pub(crate) struct FoodLayout {
    pub center: (f64, f64),
    pub radius: f64,
    /// Visible item centres and their radius (solid and mixture foods).
    pub items: Vec<(f64, f64)>,
    pub item_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub bowl: BowlSpec,
    pub food: FoodSpec,
    pub dynamics: Dynamics,
    fill: f64,
    initial_fill: f64,
    pose: Pose,
    step_index: u64,
    attempt_step: usize,
    attempts_done: usize,
    seed: u64,
    /// Offset of the food pile inside the bowl, as a point in the unit disk.
    pile_offset: (f64, f64),
    /// Candidate item positions in the unit disk; the first few are visible.
    item_slots: Vec<(f64, f64)>,
    load: f64,
    attempt_loaded: bool,
    attempt_spilled: bool,
    attempt_collided: bool,
    scooped_total: f64,
    spill_steps: Vec<u64>,
}

fn unit_disk_point(rng: &mut seed::Rng, max_radius: f64) -> (f64, f64) {
    let r = max_radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    (r * a.cos(), r * a.sin())
}

pub fn make_env(bowl: BowlSpec, food: FoodSpec, fill: f64, seed: u64) -> Result<SimState> {
    make_env_with(bowl, food, fill, seed, Dynamics::default())
}

pub fn make_env_with(
    bowl: BowlSpec,
    food: FoodSpec,
    fill: f64,
    seed: u64,
    dynamics: Dynamics,
) -> Result<SimState> {
    if !(0.0..=1.0).contains(&fill) {
        return Err(ImrlError::config("fill", format!("fill {fill} outside [0, 1]")));
    }
    if dynamics.attempt_steps == 0 {
        return Err(ImrlError::config("attempt_steps", "must be >= 1"));
    }
    bowl.validate()?;
    let mut rng = seed::rng(seed::derive(seed, "env-layout"));
    let pile_offset = if food.property.is_fluid() {
        (0.0, 0.0)
    } else {
        unit_disk_point(&mut rng, 0.9)
    };
    let slots = match food.property {
        PropertyClass::Solid => dynamics.solid_max_items,
        PropertyClass::Mixture => dynamics.mixture_max_items,
        _ => 0,
    };
    let item_slots = (0..slots).map(|_| unit_disk_point(&mut rng, 1.0)).collect();
    Ok(SimState {
        bowl,
        food,
        dynamics,
        fill,
        initial_fill: fill,
        pose: HOME,
        step_index: 0,
        attempt_step: 0,
        attempts_done: 0,
        seed,
        pile_offset,
        item_slots,
        load: 0.0,
        attempt_loaded: false,
        attempt_spilled: false,
        attempt_collided: false,
        scooped_total: 0.0,
        spill_steps: Vec::new(),
    })
}

impl SimState {
    pub fn fill(&self) -> f64 {
        self.fill
    }

    pub fn initial_fill(&self) -> f64 {
        self.initial_fill
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Step within the current attempt, `0..attempt_steps`.
    pub fn attempt_step(&self) -> usize {
        self.attempt_step
    }

    pub fn attempts_done(&self) -> usize {
        self.attempts_done
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    /// Total food removed from the bowl so far.
    pub fn scooped_total(&self) -> f64 {
        self.scooped_total
    }

    pub fn spill_steps(&self) -> &[u64] {
        &self.spill_steps
    }

    pub(crate) fn layout(&self) -> FoodLayout {
        let bowl_r = self.bowl.radius;
        let radius = (self.fill * self.bowl.interior_area() / std::f64::consts::PI).sqrt();
        let slack = (bowl_r - radius).max(0.0);
        let center = (
            self.bowl.center.0 + self.pile_offset.0 * slack,
            self.bowl.center.1 + self.pile_offset.1 * slack,
        );
        let (item_radius, max_items) = match self.food.property {
            PropertyClass::Solid => (self.dynamics.solid_item_radius_px, self.dynamics.solid_max_items),
            PropertyClass::Mixture => (
                self.dynamics.mixture_item_radius_px,
                self.dynamics.mixture_max_items,
            ),
            _ => (0.0, 0),
        };
        let visible = if self.fill > 0.0 {
            ((self.fill * max_items as f64).ceil() as usize).min(max_items)
        } else {
            0
        };
        let spread = (radius - item_radius).max(0.0);
        let items = self.item_slots[..visible]
            .iter()
            .map(|&(u, v)| (center.0 + u * spread, center.1 + v * spread))
            .collect();
        FoodLayout {
            center,
            radius,
            items,
            item_radius,
        }
    }

    pub(crate) fn is_food_at(layout: &FoodLayout, bowl: &BowlSpec, property: PropertyClass, px: f64, py: f64) -> bool {
        if !bowl.in_interior(px, py) {
            return false;
        }
        let near = |c: (f64, f64), r: f64| {
            let (dx, dy) = (px - c.0, py - c.1);
            dx * dx + dy * dy <= r * r
        };
        match property {
            PropertyClass::Solid => layout.items.iter().any(|&c| near(c, layout.item_radius)),
            _ => layout.radius > 0.0 && near(layout.center, layout.radius),
        }
    }

    /// Ground-truth food mask of the environment frame.
    pub fn food_mask(&self) -> BinaryMask {
        let layout = self.layout();
        let property = self.food.property;
        BinaryMask::from_fn(FRAME, FRAME, |x, y| {
            Self::is_food_at(&layout, &self.bowl, property, x as f64, y as f64)
        })
        .expect("frame is nonempty")
    }

    fn spills(&self, tilt: f64, horizontal_move: f64) -> bool {
        let d = &self.dynamics;
        match self.food.property {
            PropertyClass::Granular => tilt.abs() > d.granular_tilt_limit,
            PropertyClass::Liquid | PropertyClass::Mixture => {
                horizontal_move > d.liquid_spill_speed || tilt > d.liquid_tilt_max
            }
            PropertyClass::SemiSolid | PropertyClass::Solid => false,
        }
    }

    /// Food picked up by a sweep ending at pixel `(px, py)` with the given
    /// penetration and tilt.
    fn scoop_amount(&self, mask: &BinaryMask, layout: &FoodLayout, px: f64, py: f64, penetration: f64, tilt: f64) -> f64 {
        let d = &self.dynamics;
        let r = d.spoon_radius_px;
        let (cx, cy) = (px.round() as i64, py.round() as i64);
        let reach = r.ceil() as i64;
        let (mut food, mut total) = (0u32, 0u32);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= r * r {
                    total += 1;
                    food += u32::from(mask.get_signed(cx + dx, cy + dy));
                }
            }
        }
        let overlap = f64::from(food) / f64::from(total);
        let on_item = layout.items.iter().any(|&(ix, iy)| {
            let (dx, dy) = (px - ix, py - iy);
            dx * dx + dy * dy <= layout.item_radius * layout.item_radius
        });
        match self.food.property {
            PropertyClass::Granular => {
                d.granular_capacity * overlap * (penetration / d.granular_full_penetration).min(1.0)
            }
            PropertyClass::Liquid => d.liquid_capacity * overlap,
            PropertyClass::SemiSolid => {
                if penetration >= d.chunk_depth && tilt >= d.semi_solid_tilt_min {
                    d.semi_solid_capacity * overlap
                } else {
                    0.0
                }
            }
            PropertyClass::Solid => {
                if on_item {
                    d.solid_item_volume
                } else {
                    0.0
                }
            }
            PropertyClass::Mixture => {
                d.liquid_capacity * overlap + if on_item { d.mixture_item_bonus } else { 0.0 }
            }
        }
    }

    /// Advances one control step: the spoon moves in a straight line to the
    /// (clamped) action pose and the scooping rules are applied.
    pub fn step(&self, action: &[f64]) -> Result<(SimState, StepOutcome)> {
        if action.len() != 6 {
            return Err(ImrlError::Action(format!("expected 6 values, got {}", action.len())));
        }
        if let Some(bad) = action.iter().find(|v| !v.is_finite()) {
            return Err(ImrlError::Action(format!("non-finite component {bad}")));
        }
        let mut next = self.clone();
        let d = self.dynamics;
        let start = self.pose;
        let mut end = [0.0; 6];
        for (e, a) in end.iter_mut().zip(action) {
            *e = a.clamp(-1.0, 1.0);
        }
        let mut outcome = StepOutcome::default();

        let (sx, sy) = (to_pixel(start[X]), to_pixel(start[Y]));
        let (ex, ey) = (to_pixel(end[X]), to_pixel(end[Y]));
        let pixel_travel = ((ex - sx).powi(2) + (ey - sy).powi(2)).sqrt();
        let samples = 1 + ((pixel_travel.max((end[DEPTH] - start[DEPTH]).abs() * 20.0)) * 2.0).ceil() as usize;
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            let px = sx + t * (ex - sx);
            let py = sy + t * (ey - sy);
            let depth = start[DEPTH] + t * (end[DEPTH] - start[DEPTH]);
            if depth > d.rim_depth && self.bowl.in_wall(px, py) {
                outcome.collided_with_bowl = true;
                break;
            }
        }

        let horizontal_move = ((end[X] - start[X]).powi(2) + (end[Y] - start[Y]).powi(2)).sqrt();
        let was_loaded = self.load > 0.0;
        let mut loaded_now = false;
        if !self.attempt_loaded && horizontal_move >= d.sweep_min {
            let mask = self.food_mask();
            let surface = d.surface_depth(self.fill);
            let penetration = |depth: f64| depth.min(d.floor_depth) - surface;
            let in_food = |px: f64, py: f64| mask.get_signed(px.round() as i64, py.round() as i64);
            let pen = penetration(start[DEPTH]).min(penetration(end[DEPTH]));
            if in_food(sx, sy) && in_food(ex, ey) && pen >= d.min_penetration {
                let layout = self.layout();
                let amount = self
                    .scoop_amount(&mask, &layout, ex, ey, pen, end[TILT])
                    .min(self.fill);
                if amount > 0.0 {
                    next.fill -= amount;
                    next.scooped_total += amount;
                    next.load = amount;
                    next.attempt_loaded = true;
                    outcome.scooped_amount = amount;
                    loaded_now = true;
                }
            }
        }
        if (was_loaded || loaded_now) && self.spills(end[TILT], horizontal_move) {
            outcome.spilled = true;
            next.load = 0.0;
            next.attempt_spilled = true;
            next.spill_steps.push(self.step_index);
        }
        if outcome.collided_with_bowl {
            next.attempt_collided = true;
        }

        next.pose = end;
        next.step_index += 1;
        next.attempt_step += 1;
        if next.attempt_step == d.attempt_steps {
            let failed = next.attempt_spilled || next.attempt_collided || end[DEPTH] > d.rim_depth;
            outcome.attempt = Some(AttemptOutcome {
                scooped_amount: if failed { 0.0 } else { next.load },
                spilled: next.attempt_spilled,
                collided_with_bowl: next.attempt_collided,
            });
            next.pose = HOME;
            next.load = 0.0;
            next.attempt_step = 0;
            next.attempts_done += 1;
            next.attempt_loaded = false;
            next.attempt_spilled = false;
            next.attempt_collided = false;
        }
        Ok((next, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_env(fill: f64) -> SimState {
        make_env(
            BowlSpec::white_circular(),
            FoodSpec::by_name("cereals").unwrap(),
            fill,
            3,
        )
        .unwrap()
    }

    #[test]
    fn make_env_validates_and_is_deterministic() {
        let a = default_env(0.8);
        assert_eq!(a, default_env(0.8));
        assert_eq!(a.pose(), HOME);
        assert!(make_env(BowlSpec::white_circular(), FoodSpec::by_name("cereals").unwrap(), 1.2, 3).is_err());
        let mut big = BowlSpec::white_circular();
        big.radius = 40.0;
        assert!(matches!(
            make_env(big, FoodSpec::by_name("cereals").unwrap(), 0.5, 3),
            Err(ImrlError::Config { .. })
        ));
    }

    #[test]
    fn moving_outside_the_bowl_does_nothing() {
        let s = default_env(0.8);
        let (n, out) = s.step(&[-0.95, 0.9, 0.5, 0.0, -0.75, 0.0]).unwrap();
        assert_eq!(out.scooped_amount, 0.0);
        assert!(!out.spilled && !out.collided_with_bowl);
        assert_eq!(n.fill(), 0.8);
    }

    #[test]
    fn rejects_bad_actions() {
        let s = default_env(0.8);
        assert!(matches!(s.step(&[0.0; 5]), Err(ImrlError::Action(_))));
        assert!(matches!(
            s.step(&[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]),
            Err(ImrlError::Action(_))
        ));
    }

    #[test]
    fn crossing_the_wall_below_the_rim_collides() {
        let s = default_env(0.8);
        // Move from outside the bowl to its centre while below the rim.
        let (s, _) = s.step(&[-0.95, 0.0, 0.0, 0.0, -0.75, 0.0]).unwrap();
        let (_, out) = s.step(&[0.0, 0.0, 0.0, 0.0, -0.5, 0.0]).unwrap();
        assert!(out.collided_with_bowl);
    }

    #[test]
    fn food_mask_grows_with_fill() {
        assert!(default_env(0.2).food_mask().count() < default_env(0.8).food_mask().count());
        assert_eq!(default_env(0.0).food_mask().count(), 0);
    }

    #[test]
    fn surface_gets_deeper_as_fill_drops() {
        let d = Dynamics::default();
        assert!((d.surface_depth(1.0) - d.rim_depth).abs() < 1e-12);
        assert_eq!(d.surface_depth(0.0), d.floor_depth);
        assert!(d.surface_depth(0.2) > d.surface_depth(0.8));
    }

    #[test]
    fn pixel_mapping_round_trips() {
        for p in [0.0, 13.0, 31.5, 63.0] {
            assert!((to_pixel(from_pixel(p)) - p).abs() < 1e-12);
        }
    }
}
