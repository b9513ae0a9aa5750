//! JSON-lines trajectory export. One record per step; image buffers are
//! base-64 raw RGB and every mask is written as a PGM next to the JSONL file.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::catalog::{BowlSpec, FoodSpec, FRAME, HAND};
use super::render::Observation;
use super::rollout::{Trajectory, TrajectoryStep};
use super::state::{Pose, StepOutcome};
use crate::error::{ImrlError, Result};
use crate::geometry::BinaryMask;
use crate::image::RgbImage;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: usize,
    pub t: usize,
    pub bowl: BowlSpec,
    pub food: FoodSpec,
    pub initial_fill: f64,
    pub seed: u64,
    pub env_image: String,
    pub hand_image: String,
    pub proprio: Pose,
    pub action: Pose,
    /// Mask file, relative to the JSONL file's directory.
    pub mask: String,
    pub outcome: StepOutcome,
}

fn mask_dir(jsonl: &Path) -> PathBuf {
    let stem = jsonl.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectories");
    PathBuf::from(format!("{stem}_masks"))
}

/// Writes `trajs` to `path` and the masks to `<stem>_masks/` beside it.
pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let parent = path.parent().unwrap_or(Path::new("."));
    let rel_dir = mask_dir(path);
    fs::create_dir_all(parent.join(&rel_dir)).map_err(|e| ImrlError::io(parent.join(&rel_dir), e))?;
    let file = fs::File::create(path).map_err(|e| ImrlError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (episode, traj) in trajs.iter().enumerate() {
        for (t, step) in traj.steps.iter().enumerate() {
            let mask_rel = rel_dir.join(format!("ep{episode:04}_t{t:04}.pgm"));
            let mask_path = parent.join(&mask_rel);
            fs::write(&mask_path, step.obs.mask.to_pgm()).map_err(|e| ImrlError::io(&mask_path, e))?;
            let rec = StepRecord {
                episode,
                t,
                bowl: traj.bowl.clone(),
                food: traj.food.clone(),
                initial_fill: traj.initial_fill,
                seed: traj.seed,
                env_image: STANDARD.encode(step.obs.env.as_raw()),
                hand_image: STANDARD.encode(step.obs.hand.as_raw()),
                proprio: step.obs.proprio,
                action: step.action,
                mask: mask_rel.to_string_lossy().replace('\\', "/"),
                outcome: step.outcome,
            };
            let line = serde_json::to_string(&rec).map_err(|e| ImrlError::format("trajectory", e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| ImrlError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| ImrlError::io(path, e))
}

fn decode_image(b64: &str, side: usize) -> Result<RgbImage> {
    let raw = STANDARD
        .decode(b64)
        .map_err(|e| ImrlError::format("trajectory", format!("bad base64 image: {e}")))?;
    RgbImage::from_raw(side, side, raw)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let parent = path.parent().unwrap_or(Path::new("."));
    let file = fs::File::open(path).map_err(|e| ImrlError::io(path, e))?;
    let mut trajs: Vec<Trajectory> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ImrlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|e| ImrlError::format("trajectory", format!("line {}: {e}", lineno + 1)))?;
        let mask_path = parent.join(&rec.mask);
        let text = fs::read_to_string(&mask_path).map_err(|e| ImrlError::io(&mask_path, e))?;
        let step = TrajectoryStep {
            obs: Observation {
                env: decode_image(&rec.env_image, FRAME)?,
                hand: decode_image(&rec.hand_image, HAND)?,
                proprio: rec.proprio,
                mask: BinaryMask::from_pgm(&text)?,
            },
            action: rec.action,
            outcome: rec.outcome,
        };
        if rec.episode == trajs.len() {
            trajs.push(Trajectory {
                bowl: rec.bowl,
                food: rec.food,
                initial_fill: rec.initial_fill,
                seed: rec.seed,
                steps: Vec::new(),
            });
        } else if rec.episode + 1 != trajs.len() {
            return Err(ImrlError::format(
                "trajectory",
                format!("line {}: episode {} out of order", lineno + 1, rec.episode),
            ));
        }
        trajs.last_mut().expect("pushed above").steps.push(step);
    }
    Ok(trajs)
}
