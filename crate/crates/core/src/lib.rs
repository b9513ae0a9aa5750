//! Integrated multi-dimensional representation learning for a synthetic
//! food-scooping task: encoder pretraining with visual, physical, temporal
//! and geometric objectives, behavior cloning on top of the learned
//! representation, and a deterministic scooping simulator to evaluate it.

pub mod config;
pub mod error;
pub mod geometry;
pub mod image;
pub mod losses;
pub mod numeric;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod simworld;

pub use error::{ImrlError, Result};
pub use config::{parse_config, RunConfig};
pub use report::{write_report, MetricsReport, MetricsRow};
