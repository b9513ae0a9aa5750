//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown keys and out-of-range values are rejected with the key
//! name. The canonical form lists every key in sorted order, and its SHA-256
//! is the config hash stamped on every artifact.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{ImrlError, Result};
use crate::losses::LossWeights;
use crate::pipeline::{BcConfig, DatasetSpec, EncodeOptions, EncoderConfig, EvalConfig, ReprTrainConfig};
use crate::simworld::{Dynamics, EnvSuite};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub margin_alpha: f64,
    pub lambda_ce: f64,
    pub lambda_tri: f64,
    pub lambda_temp: f64,
    pub lambda_full: f64,
    pub density_radius: usize,
    pub scoop_margin: f64,
    pub history_k: usize,
    pub temporal_frames: usize,
    pub embed_dim: usize,
    pub images_per_class: usize,
    pub closeup_fraction: f64,
    pub repr_epochs: usize,
    pub repr_lr: f64,
    pub batch_size: usize,
    pub clip_batch: usize,
    pub clips_per_attempt: usize,
    pub hard_mining: bool,
    pub demos: usize,
    pub attempts: usize,
    pub bc_epochs: usize,
    pub bc_lr: f64,
    pub bc_batch: usize,
    pub policy_hidden: usize,
    pub finetune_encoder: bool,
    pub finetune_lr: f64,
    pub embed_noise: f64,
    pub eval_episodes: usize,
    pub eval_suite: String,
    pub ablation_suite: String,
    pub threads: usize,
    /// Initial fill of demo and evaluation episodes; drawn per episode when
    /// unset.
    pub fullness_label: Option<f64>,
    pub tsne_perplexity: f64,
    pub tsne_iters: usize,
    pub tsne_points: usize,
    pub out_dir: PathBuf,
    pub demos_path: Option<PathBuf>,
    pub encoder_path: Option<PathBuf>,
    pub policy_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    pub loss_path: Option<PathBuf>,
    pub embed_path: Option<PathBuf>,
    pub tsne_path: Option<PathBuf>,
    pub dynamics: Dynamics,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            margin_alpha: 0.2,
            lambda_ce: 1.0,
            lambda_tri: 1.0,
            lambda_temp: 1.0,
            lambda_full: 1.0,
            density_radius: 9,
            scoop_margin: 3.0,
            history_k: 4,
            temporal_frames: 4,
            embed_dim: 32,
            images_per_class: 400,
            closeup_fraction: 0.1,
            repr_epochs: 30,
            repr_lr: 1e-3,
            batch_size: 32,
            clip_batch: 8,
            clips_per_attempt: 2,
            hard_mining: false,
            demos: 30,
            attempts: 10,
            bc_epochs: 200,
            bc_lr: 1e-3,
            bc_batch: 64,
            policy_hidden: 128,
            finetune_encoder: true,
            finetune_lr: 1e-4,
            embed_noise: 1.0,
            eval_episodes: 50,
            eval_suite: "in-distribution".into(),
            ablation_suite: "generalization".into(),
            threads: 0,
            fullness_label: None,
            tsne_perplexity: 30.0,
            tsne_iters: 500,
            tsne_points: 300,
            out_dir: PathBuf::from("out"),
            demos_path: None,
            encoder_path: None,
            policy_path: None,
            metrics_path: None,
            loss_path: None,
            embed_path: None,
            tsne_path: None,
            dynamics: Dynamics::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| ImrlError::config(key, format!("cannot parse `{value}`: {e}")))
}

fn check(key: &str, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ImrlError::config(key, format!("must be {what}")))
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dynamics;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "margin_alpha" => self.margin_alpha = parse(key, value)?,
            "lambda_ce" => self.lambda_ce = parse(key, value)?,
            "lambda_tri" => self.lambda_tri = parse(key, value)?,
            "lambda_temp" => self.lambda_temp = parse(key, value)?,
            "lambda_full" => self.lambda_full = parse(key, value)?,
            "density_radius" => self.density_radius = parse(key, value)?,
            "scoop_margin" => self.scoop_margin = parse(key, value)?,
            "history_k" => self.history_k = parse(key, value)?,
            "temporal_frames" => self.temporal_frames = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "images_per_class" => self.images_per_class = parse(key, value)?,
            "closeup_fraction" => self.closeup_fraction = parse(key, value)?,
            "repr_epochs" => self.repr_epochs = parse(key, value)?,
            "repr_lr" => self.repr_lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "clip_batch" => self.clip_batch = parse(key, value)?,
            "clips_per_attempt" => self.clips_per_attempt = parse(key, value)?,
            "hard_mining" => self.hard_mining = parse(key, value)?,
            "demos" => self.demos = parse(key, value)?,
            "attempts" => self.attempts = parse(key, value)?,
            "bc_epochs" => self.bc_epochs = parse(key, value)?,
            "bc_lr" => self.bc_lr = parse(key, value)?,
            "bc_batch" => self.bc_batch = parse(key, value)?,
            "policy_hidden" => self.policy_hidden = parse(key, value)?,
            "finetune_encoder" => self.finetune_encoder = parse(key, value)?,
            "finetune_lr" => self.finetune_lr = parse(key, value)?,
            "embed_noise" => self.embed_noise = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "eval_suite" => self.eval_suite = value.to_string(),
            "ablation_suite" => self.ablation_suite = value.to_string(),
            "threads" => self.threads = parse(key, value)?,
            "fullness_label" => {
                self.fullness_label = match value {
                    "" | "random" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "tsne_perplexity" => self.tsne_perplexity = parse(key, value)?,
            "tsne_iters" => self.tsne_iters = parse(key, value)?,
            "tsne_points" => self.tsne_points = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "demos_path" => self.demos_path = opt_path(value),
            "encoder_path" => self.encoder_path = opt_path(value),
            "policy_path" => self.policy_path = opt_path(value),
            "metrics_path" => self.metrics_path = opt_path(value),
            "loss_path" => self.loss_path = opt_path(value),
            "embed_path" => self.embed_path = opt_path(value),
            "tsne_path" => self.tsne_path = opt_path(value),
            "rim_depth" => d.rim_depth = parse(key, value)?,
            "floor_depth" => d.floor_depth = parse(key, value)?,
            "min_penetration" => d.min_penetration = parse(key, value)?,
            "sweep_min" => d.sweep_min = parse(key, value)?,
            "spoon_radius_px" => d.spoon_radius_px = parse(key, value)?,
            "granular_full_penetration" => d.granular_full_penetration = parse(key, value)?,
            "granular_capacity" => d.granular_capacity = parse(key, value)?,
            "granular_tilt_limit" => d.granular_tilt_limit = parse(key, value)?,
            "liquid_capacity" => d.liquid_capacity = parse(key, value)?,
            "liquid_spill_speed" => d.liquid_spill_speed = parse(key, value)?,
            "liquid_tilt_max" => d.liquid_tilt_max = parse(key, value)?,
            "semi_solid_capacity" => d.semi_solid_capacity = parse(key, value)?,
            "chunk_depth" => d.chunk_depth = parse(key, value)?,
            "semi_solid_tilt_min" => d.semi_solid_tilt_min = parse(key, value)?,
            "solid_item_volume" => d.solid_item_volume = parse(key, value)?,
            "solid_item_radius_px" => d.solid_item_radius_px = parse(key, value)?,
            "solid_max_items" => d.solid_max_items = parse(key, value)?,
            "mixture_item_bonus" => d.mixture_item_bonus = parse(key, value)?,
            "mixture_item_radius_px" => d.mixture_item_radius_px = parse(key, value)?,
            "mixture_max_items" => d.mixture_max_items = parse(key, value)?,
            "success_threshold" => d.success_threshold = parse(key, value)?,
            "attempt_steps" => d.attempt_steps = parse(key, value)?,
            _ => return Err(ImrlError::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its current value.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let d = &self.dynamics;
        let entries: Vec<(&'static str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("margin_alpha", self.margin_alpha.to_string()),
            ("lambda_ce", self.lambda_ce.to_string()),
            ("lambda_tri", self.lambda_tri.to_string()),
            ("lambda_temp", self.lambda_temp.to_string()),
            ("lambda_full", self.lambda_full.to_string()),
            ("density_radius", self.density_radius.to_string()),
            ("scoop_margin", self.scoop_margin.to_string()),
            ("history_k", self.history_k.to_string()),
            ("temporal_frames", self.temporal_frames.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("images_per_class", self.images_per_class.to_string()),
            ("closeup_fraction", self.closeup_fraction.to_string()),
            ("repr_epochs", self.repr_epochs.to_string()),
            ("repr_lr", self.repr_lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("clip_batch", self.clip_batch.to_string()),
            ("clips_per_attempt", self.clips_per_attempt.to_string()),
            ("hard_mining", self.hard_mining.to_string()),
            ("demos", self.demos.to_string()),
            ("attempts", self.attempts.to_string()),
            ("bc_epochs", self.bc_epochs.to_string()),
            ("bc_lr", self.bc_lr.to_string()),
            ("bc_batch", self.bc_batch.to_string()),
            ("policy_hidden", self.policy_hidden.to_string()),
            ("finetune_encoder", self.finetune_encoder.to_string()),
            ("finetune_lr", self.finetune_lr.to_string()),
            ("embed_noise", self.embed_noise.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("eval_suite", self.eval_suite.clone()),
            ("ablation_suite", self.ablation_suite.clone()),
            ("threads", self.threads.to_string()),
            ("fullness_label", self.fullness_label.map_or("random".into(), |v| v.to_string())),
            ("tsne_perplexity", self.tsne_perplexity.to_string()),
            ("tsne_iters", self.tsne_iters.to_string()),
            ("tsne_points", self.tsne_points.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("demos_path", show_path(&self.demos_path)),
            ("encoder_path", show_path(&self.encoder_path)),
            ("policy_path", show_path(&self.policy_path)),
            ("metrics_path", show_path(&self.metrics_path)),
            ("loss_path", show_path(&self.loss_path)),
            ("embed_path", show_path(&self.embed_path)),
            ("tsne_path", show_path(&self.tsne_path)),
            ("rim_depth", d.rim_depth.to_string()),
            ("floor_depth", d.floor_depth.to_string()),
            ("min_penetration", d.min_penetration.to_string()),
            ("sweep_min", d.sweep_min.to_string()),
            ("spoon_radius_px", d.spoon_radius_px.to_string()),
            ("granular_full_penetration", d.granular_full_penetration.to_string()),
            ("granular_capacity", d.granular_capacity.to_string()),
            ("granular_tilt_limit", d.granular_tilt_limit.to_string()),
            ("liquid_capacity", d.liquid_capacity.to_string()),
            ("liquid_spill_speed", d.liquid_spill_speed.to_string()),
            ("liquid_tilt_max", d.liquid_tilt_max.to_string()),
            ("semi_solid_capacity", d.semi_solid_capacity.to_string()),
            ("chunk_depth", d.chunk_depth.to_string()),
            ("semi_solid_tilt_min", d.semi_solid_tilt_min.to_string()),
            ("solid_item_volume", d.solid_item_volume.to_string()),
            ("solid_item_radius_px", d.solid_item_radius_px.to_string()),
            ("solid_max_items", d.solid_max_items.to_string()),
            ("mixture_item_bonus", d.mixture_item_bonus.to_string()),
            ("mixture_item_radius_px", d.mixture_item_radius_px.to_string()),
            ("mixture_max_items", d.mixture_max_items.to_string()),
            ("success_threshold", d.success_threshold.to_string()),
            ("attempt_steps", d.attempt_steps.to_string()),
        ];
        entries.into_iter().collect()
    }

    /// Range checks over every key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dynamics;
        check("margin_alpha", self.margin_alpha >= 0.0, ">= 0")?;
        for (k, v) in [
            ("lambda_ce", self.lambda_ce),
            ("lambda_tri", self.lambda_tri),
            ("lambda_temp", self.lambda_temp),
            ("lambda_full", self.lambda_full),
        ] {
            check(k, v >= 0.0 && v.is_finite(), "a finite value >= 0")?;
        }
        check("density_radius", self.density_radius >= 1, ">= 1")?;
        check("scoop_margin", self.scoop_margin >= 0.0 && self.scoop_margin.is_finite(), ">= 0")?;
        check("history_k", self.history_k >= 1, ">= 1")?;
        check("temporal_frames", self.temporal_frames >= 2, ">= 2")?;
        check("temporal_frames", self.temporal_frames <= d.attempt_steps, "<= attempt_steps")?;
        check("embed_dim", self.embed_dim >= 1, ">= 1")?;
        check("images_per_class", self.images_per_class >= 2, ">= 2")?;
        check("closeup_fraction", (0.0..=1.0).contains(&self.closeup_fraction), "in [0, 1]")?;
        check("repr_lr", self.repr_lr > 0.0, "> 0")?;
        check("bc_lr", self.bc_lr > 0.0, "> 0")?;
        check("finetune_lr", self.finetune_lr > 0.0, "> 0")?;
        check("embed_noise", self.embed_noise >= 0.0 && self.embed_noise.is_finite(), ">= 0")?;
        for (k, v) in [
            ("batch_size", self.batch_size),
            ("clip_batch", self.clip_batch),
            ("clips_per_attempt", self.clips_per_attempt),
            ("demos", self.demos),
            ("attempts", self.attempts),
            ("bc_batch", self.bc_batch),
            ("policy_hidden", self.policy_hidden),
            ("eval_episodes", self.eval_episodes),
            ("tsne_points", self.tsne_points),
        ] {
            check(k, v >= 1, ">= 1")?;
        }
        EnvSuite::by_name(&self.eval_suite).map_err(|e| ImrlError::config("eval_suite", e.to_string()))?;
        EnvSuite::by_name(&self.ablation_suite).map_err(|e| ImrlError::config("ablation_suite", e.to_string()))?;
        if let Some(f) = self.fullness_label {
            check("fullness_label", (0.0..=1.0).contains(&f), "in [0, 1] or `random`")?;
        }
        check("tsne_perplexity", self.tsne_perplexity > 0.0, "> 0")?;
        check("tsne_points", self.tsne_points <= crate::pipeline::TSNE_MAX_POINTS, "<= 1000")?;
        check("rim_depth", d.rim_depth < d.floor_depth, "above floor_depth")?;
        check("attempt_steps", d.attempt_steps >= 5, ">= 5")?;
        for (k, v) in [
            ("min_penetration", d.min_penetration),
            ("sweep_min", d.sweep_min),
            ("spoon_radius_px", d.spoon_radius_px),
            ("granular_full_penetration", d.granular_full_penetration),
            ("granular_capacity", d.granular_capacity),
            ("liquid_capacity", d.liquid_capacity),
            ("liquid_spill_speed", d.liquid_spill_speed),
            ("semi_solid_capacity", d.semi_solid_capacity),
            ("solid_item_volume", d.solid_item_volume),
            ("solid_item_radius_px", d.solid_item_radius_px),
            ("mixture_item_radius_px", d.mixture_item_radius_px),
            ("success_threshold", d.success_threshold),
        ] {
            check(k, v > 0.0 && v.is_finite(), "a finite value > 0")?;
        }
        check("mixture_item_bonus", d.mixture_item_bonus >= 0.0, ">= 0")?;
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ImrlError::config(line, format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ImrlError::config(key, "key given twice"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key=value` lines for every key, sorted by key.
    pub fn canonical(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn path_or(&self, p: &Option<PathBuf>, default: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.out_dir.join(default))
    }

    pub fn demos_file(&self) -> PathBuf {
        self.path_or(&self.demos_path, "demos.jsonl")
    }

    pub fn encoder_file(&self) -> PathBuf {
        self.path_or(&self.encoder_path, "encoder.bin")
    }

    pub fn policy_file(&self) -> PathBuf {
        self.path_or(&self.policy_path, "policy.bin")
    }

    pub fn metrics_file(&self) -> PathBuf {
        self.path_or(&self.metrics_path, "metrics.csv")
    }

    pub fn loss_file(&self) -> PathBuf {
        self.path_or(&self.loss_path, "loss.csv")
    }

    pub fn embed_file(&self) -> PathBuf {
        self.path_or(&self.embed_path, "embeddings.csv")
    }

    pub fn tsne_file(&self) -> PathBuf {
        self.path_or(&self.tsne_path, "tsne.csv")
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            ce: self.lambda_ce,
            tri: self.lambda_tri,
            temp: self.lambda_temp,
            full: self.lambda_full,
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            per_class: self.images_per_class,
            closeup_fraction: self.closeup_fraction,
            ..DatasetSpec::default()
        }
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            density_radius: self.density_radius,
            scoop_margin: self.scoop_margin,
            ..EncodeOptions::default()
        }
    }

    pub fn repr_config(&self) -> ReprTrainConfig {
        ReprTrainConfig {
            encoder: EncoderConfig {
                embed_dim: self.embed_dim,
                frames: self.temporal_frames,
                ..EncoderConfig::default()
            },
            epochs: self.repr_epochs,
            batch_size: self.batch_size,
            clip_batch: self.clip_batch,
            lr: self.repr_lr,
            margin: self.margin_alpha,
            hard_mining: self.hard_mining,
            seed: crate::seed::derive(self.seed, "repr"),
        }
    }

    pub fn bc_config(&self) -> BcConfig {
        BcConfig {
            history_k: self.history_k,
            epochs: self.bc_epochs,
            batch_size: self.bc_batch,
            lr: self.bc_lr,
            hidden: self.policy_hidden,
            finetune_encoder: self.finetune_encoder,
            finetune_lr: self.finetune_lr,
            embed_noise: self.embed_noise,
            encode: self.encode_options(),
            seed: crate::seed::derive(self.seed, "bc"),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            episodes: self.eval_episodes,
            attempts: self.attempts,
            fill: self.fullness_label,
            encode: self.encode_options(),
            seed: crate::seed::derive(self.seed, "eval"),
            threads: self.threads,
        }
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ImrlError::config("config", format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.margin_alpha, c.density_radius, c.scoop_margin), (0.2, 9, 3.0));
        assert_eq!((c.history_k, c.temporal_frames), (4, 4));
        assert_eq!(c.loss_weights(), LossWeights::default());
    }

    #[test]
    fn range_errors_name_the_key() {
        match RunConfig::parse_str("margin_alpha=-1") {
            Err(ImrlError::Config { key, .. }) => assert_eq!(key, "margin_alpha"),
            other => panic!("{other:?}"),
        }
        match RunConfig::parse_str("# comment\nfrobnicate = 3") {
            Err(ImrlError::Config { key, .. }) => assert_eq!(key, "frobnicate"),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::parse_str("seed=1\nseed=2").is_err());
        assert!(RunConfig::parse_str("eval_suite=mars").is_err());
    }

    #[test]
    fn fullness_label_accepted() {
        let c = RunConfig::parse_str("fullness_label=0.8").unwrap();
        assert_eq!(c.fullness_label, Some(0.8));
        assert!(RunConfig::parse_str("fullness_label=1.5").is_err());
    }

    #[test]
    fn canonical_form_covers_every_key_and_round_trips() {
        let c = RunConfig::parse_str("seed=7\nlambda_tri=0\nliquid_spill_speed=0.2").unwrap();
        let again = RunConfig::parse_str(&c.canonical()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        assert_ne!(c.hash(), RunConfig::default().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn missing_file_is_a_config_error() {
        assert!(matches!(
            parse_config(Path::new("/nonexistent/run.cfg")),
            Err(ImrlError::Config { .. })
        ));
    }
}
