//! Deterministic top-down scooping simulator.
//!
//! The spoon pose is a 6-vector `(x, y, depth, tilt, sweep_phase, spare)` in
//! `[-1, 1]`. An attempt lasts a fixed number of steps; food picked up during
//! the attempt counts as delivered if it is still on the spoon, above the
//! rim and clear of the bowl when the attempt ends.

mod catalog;
mod dynamics;
mod expert;
mod metrics;
mod render;
mod rollout;
mod state;
mod suite;
pub mod trajectory;

pub use catalog::{food_catalog, BowlShape, BowlSpec, FoodSpec, PropertyClass, FRAME, HAND, TABLE_COLOR};
pub use dynamics::Dynamics;
pub use expert::{
    expert_action, phase_clock, scoop_profile, target_depth, ScoopProfile, EXPERT_MARGIN, EXPERT_WINDOW, SWEEP,
    TRAVEL_DEPTH,
};
pub use metrics::{episode_metrics, episode_metrics_with, is_success, EpisodeMetrics, AFS_WINDOW, SUCCESS_THRESHOLD};
pub use render::{render, render_env, render_hand, Observation};
pub use rollout::{rollout, rollout_expert, Trajectory, TrajectoryStep};
pub use state::{
    from_pixel, make_env, make_env_with, to_pixel, AttemptOutcome, Pose, SimState, StepOutcome, DEPTH, HOME,
    PHASE, TILT, X, Y,
};
pub use suite::{EnvSuite, SUITE_NAMES, TRAINING_FOODS, UNSEEN_BOWLS, UNSEEN_FOODS};
