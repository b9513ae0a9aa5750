use serde::{Deserialize, Serialize};

use super::dataset::{gen_food_dataset, FoodImageDataset};
use super::demos::gen_demos;
use super::encoder::{EncodeOptions, Encoder};
use super::evaluate::evaluate;
use super::policy::{train_bc, PolicyParams};
use super::repr::{clips_from_demos, train_repr, Clip};
use crate::config::RunConfig;
use crate::error::Result;
use crate::losses::LossWeights;
use crate::report::MetricsRow;
use crate::seed::derive;
use crate::simworld::{EnvSuite, Trajectory};

/// Representation variants compared against each other. `Raw` skips
/// pretraining altogether and feeds the policy an untrained encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoVisualPhysical,
    NoTemporal,
    NoGeometric,
    Raw,
}

impl Variant {
    pub const ABLATIONS: [Variant; 4] = [
        Variant::Full,
        Variant::NoVisualPhysical,
        Variant::NoTemporal,
        Variant::NoGeometric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoVisualPhysical => "no-visual-physical",
            Variant::NoTemporal => "no-temporal",
            Variant::NoGeometric => "no-geometric",
            Variant::Raw => "raw",
        }
    }

    pub fn weights(self, base: &LossWeights) -> LossWeights {
        match self {
            Variant::NoVisualPhysical => LossWeights {
                ce: 0.0,
                tri: 0.0,
                ..*base
            },
            Variant::NoTemporal => LossWeights { temp: 0.0, ..*base },
            _ => *base,
        }
    }

    pub fn encode_options(self, base: &EncodeOptions) -> EncodeOptions {
        EncodeOptions {
            zero_temporal: self == Variant::NoTemporal,
            zero_geometric: self == Variant::NoGeometric,
            ..*base
        }
    }

    /// Variants whose encoder is trained identically to the full one.
    fn shares_full_encoder(self) -> bool {
        matches!(self, Variant::Full | Variant::NoGeometric)
    }
}

/// Data shared by every variant of one comparison.
pub struct AblationData {
    pub dataset: FoodImageDataset,
    pub demos: Vec<Trajectory>,
    pub clips: Vec<Clip>,
}

impl AblationData {
    pub fn generate(cfg: &RunConfig, seed: u64) -> Result<AblationData> {
        let dataset = gen_food_dataset(&cfg.dataset_spec(), derive(seed, "dataset"))?;
        let suite = EnvSuite::by_name(&cfg.eval_suite)?;
        let demos = gen_demos(cfg.demos, &suite, cfg.attempts, cfg.fullness_label, derive(seed, "demos"))?;
        let clips = clips_from_demos(&demos, cfg.temporal_frames, cfg.clips_per_attempt, derive(seed, "clips"))?;
        Ok(AblationData { dataset, demos, clips })
    }
}

/// A trained variant, ready to evaluate.
pub struct TrainedVariant {
    pub variant: Variant,
    pub encoder: Encoder,
    pub policy: PolicyParams,
    pub encode: EncodeOptions,
}

fn run_config_with_seed(cfg: &RunConfig, seed: u64) -> RunConfig {
    RunConfig { seed, ..cfg.clone() }
}

/// Pretrains (unless `Raw`) and behavior-clones one variant. Seeds depend
/// only on `seed`, never on the variant.
pub fn train_variant(
    variant: Variant,
    data: &AblationData,
    cfg: &RunConfig,
    seed: u64,
    pretrained: Option<&Encoder>,
) -> Result<TrainedVariant> {
    let cfg = run_config_with_seed(cfg, seed);
    let repr_cfg = cfg.repr_config();
    let encoder = match (variant, pretrained) {
        (Variant::Raw, _) => Encoder::new(repr_cfg.encoder, repr_cfg.seed)?,
        (v, Some(enc)) if v.shares_full_encoder() => enc.clone(),
        (v, _) => train_repr(&data.dataset, &data.clips, &v.weights(&cfg.loss_weights()), &repr_cfg)?.0,
    };
    let encode = variant.encode_options(&cfg.encode_options());
    let bc_cfg = super::policy::BcConfig {
        encode,
        ..cfg.bc_config()
    };
    let (policy, encoder, _) = train_bc(&data.demos, &encoder, &bc_cfg)?;
    Ok(TrainedVariant {
        variant,
        encoder,
        policy,
        encode,
    })
}

/// Suite-mean metrics of a trained variant on the named suite.
pub fn evaluate_variant(t: &TrainedVariant, cfg: &RunConfig, suite: &str, seed: u64) -> Result<MetricsRow> {
    let cfg = run_config_with_seed(cfg, seed);
    let suite = EnvSuite::by_name(suite)?;
    let eval_cfg = super::evaluate::EvalConfig {
        encode: t.encode,
        ..cfg.eval_config()
    };
    let rows = evaluate(&t.policy, &t.encoder, &suite, &eval_cfg)?;
    MetricsRow::suite_mean(t.variant.name(), &suite.name, eval_cfg.seed, &rows)
}

/// Trains and evaluates the listed variants on shared data and seeds.
pub fn compare_variants(cfg: &RunConfig, seed: u64, data: &AblationData, variants: &[Variant], suite: &str) -> Result<Vec<MetricsRow>> {
    let mut full_encoder: Option<Encoder> = None;
    let mut rows = Vec::with_capacity(variants.len());
    for &v in variants {
        if v.shares_full_encoder() && full_encoder.is_none() {
            let c = run_config_with_seed(cfg, seed);
            let (enc, _) = train_repr(&data.dataset, &data.clips, &cfg.loss_weights(), &c.repr_config())?;
            full_encoder = Some(enc);
        }
        let trained = train_variant(v, data, cfg, seed, full_encoder.as_ref())?;
        rows.push(evaluate_variant(&trained, cfg, suite, seed)?);
    }
    Ok(rows)
}

/// The four-row ablation table (full, no visual/physical, no temporal, no
/// geometric) on the configured ablation suite.
pub fn ablation_suite(cfg: &RunConfig, seed: u64) -> Result<Vec<MetricsRow>> {
    let data = AblationData::generate(cfg, seed)?;
    compare_variants(cfg, seed, &data, &Variant::ABLATIONS, &cfg.ablation_suite)
}
