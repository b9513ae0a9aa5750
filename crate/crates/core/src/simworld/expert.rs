use super::catalog::PropertyClass;
use super::state::{from_pixel, Pose, SimState, DEPTH, HOME, TILT, X, Y};
use crate::error::Result;
use crate::geometry::optimal_scoop_point;

/// Density window and wall margin the expert plans with.
pub const EXPERT_WINDOW: usize = 9;
pub const EXPERT_MARGIN: f64 = 3.0;
/// Height the spoon travels at between scoops.
pub const TRAVEL_DEPTH: f64 = -0.6;
/// Horizontal sweep length through the food.
pub const SWEEP: f64 = 0.06;

/// How the expert handles a property class: penetration below the surface,
/// spoon tilt while scooping, and horizontal speed while carrying.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoopProfile {
    pub penetration: f64,
    pub tilt: f64,
    pub carry_speed: f64,
}

pub fn scoop_profile(property: PropertyClass) -> ScoopProfile {
    match property {
        PropertyClass::Granular | PropertyClass::Solid => ScoopProfile {
            penetration: 0.2,
            tilt: 0.0,
            carry_speed: 0.6,
        },
        PropertyClass::SemiSolid => ScoopProfile {
            penetration: 0.35,
            tilt: 0.6,
            carry_speed: 0.6,
        },
        PropertyClass::Liquid | PropertyClass::Mixture => ScoopProfile {
            penetration: 0.2,
            tilt: -0.6,
            carry_speed: 0.12,
        },
    }
}

/// Scooping depth the expert aims for: linear in how empty the bowl is,
/// never below the floor.
pub fn target_depth(state: &SimState) -> f64 {
    let d = &state.dynamics;
    let profile = scoop_profile(state.food.property);
    let base = d.rim_depth + profile.penetration;
    let gain = d.floor_depth - d.rim_depth;
    (base + gain * (1.0 - state.fill())).min(d.floor_depth)
}

/// Phase-clock value for step `s` of an attempt.
pub fn phase_clock(state: &SimState, s: usize) -> f64 {
    -1.0 + 2.0 * (s + 1) as f64 / state.dynamics.attempt_steps as f64
}

/// Scripted demonstrator. Phases by step within the attempt: approach above
/// the optimal scoop point, descend, sweep, lift, then carry back toward the
/// home position.
pub fn expert_action(state: &SimState) -> Result<Pose> {
    let s = state.attempt_step();
    let pose = state.pose();
    let profile = scoop_profile(state.food.property);
    let clock = phase_clock(state, s);
    let target = || -> Result<(f64, f64)> {
        let sp = optimal_scoop_point(&state.food_mask(), EXPERT_WINDOW, EXPERT_MARGIN)?;
        Ok((from_pixel(sp.x as f64), from_pixel(sp.y as f64)))
    };
    let mut a = pose;
    a[super::state::PHASE] = clock;
    a[5] = 0.0;
    match s {
        0 => {
            let (x, y) = target()?;
            a[X] = x;
            a[Y] = y;
            a[DEPTH] = TRAVEL_DEPTH;
            a[TILT] = 0.0;
        }
        1 => {
            let (x, y) = target()?;
            a[X] = x;
            a[Y] = y;
            a[DEPTH] = target_depth(state);
            a[TILT] = profile.tilt;
        }
        2 => {
            let (x, y) = target()?;
            a[X] = x + SWEEP;
            a[Y] = y;
            a[TILT] = profile.tilt;
        }
        3 => {
            a[DEPTH] = TRAVEL_DEPTH;
        }
        _ => {
            let (dx, dy) = (HOME[X] - pose[X], HOME[Y] - pose[Y]);
            let dist = (dx * dx + dy * dy).sqrt();
            let f = if dist > profile.carry_speed {
                profile.carry_speed / dist
            } else {
                1.0
            };
            a[X] = pose[X] + dx * f;
            a[Y] = pose[Y] + dy * f;
            a[DEPTH] = TRAVEL_DEPTH;
        }
    }
    Ok(a)
}
