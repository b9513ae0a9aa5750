use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{env_input_image, push_input, INPUT_DIM};
use crate::error::{ImrlError, Result};
use crate::geometry::{centroid, optimal_scoop_point, BinaryMask};
use crate::image::RgbImage;
use crate::numeric::checkpoint::{read_params, write_params};
use crate::numeric::{init_params, mlp_forward_batch, MlpParams};
use crate::seed;
use crate::simworld::FRAME;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    /// Frames fed to the temporal module.
    pub frames: usize,
    pub num_types: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 32,
            frames: 4,
            num_types: 13,
        }
    }
}

/// Shared image trunk plus the heads used during pretraining. The temporal
/// module maps the concatenated embeddings of `frames` hand images to z_u;
/// the order head sits on z_u and is only used by the pretext task.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub trunk: MlpParams,
    pub type_head: MlpParams,
    pub fullness_head: MlpParams,
    pub temporal: MlpParams,
    pub order_head: MlpParams,
}

const TRUNK_HIDDEN: [usize; 2] = [256, 64];
const HEAD_HIDDEN: usize = 64;
const TEMPORAL_HIDDEN: usize = 64;

impl Encoder {
    pub fn new(cfg: EncoderConfig, seed: u64) -> Result<Encoder> {
        let (e, n) = (cfg.embed_dim, cfg.frames);
        if e == 0 || cfg.num_types < 2 {
            return Err(ImrlError::config("embed_dim", "embedding dim must be >= 1 and there must be >= 2 types"));
        }
        if n < 2 {
            return Err(ImrlError::config("temporal_frames", "need at least 2 frames"));
        }
        Ok(Encoder {
            trunk: init_params(&[INPUT_DIM, TRUNK_HIDDEN[0], TRUNK_HIDDEN[1], e], seed::derive(seed, "trunk"))?,
            type_head: init_params(&[e, cfg.num_types], seed::derive(seed, "type-head"))?,
            fullness_head: init_params(&[e, HEAD_HIDDEN, HEAD_HIDDEN, 1], seed::derive(seed, "fullness-head"))?,
            temporal: init_params(&[n * e, TEMPORAL_HIDDEN, e], seed::derive(seed, "temporal"))?,
            order_head: init_params(&[e, TEMPORAL_HIDDEN, n * n], seed::derive(seed, "order-head"))?,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn frames(&self) -> usize {
        self.temporal.input_dim() / self.embed_dim()
    }

    pub fn num_types(&self) -> usize {
        self.type_head.output_dim()
    }

    /// Dimension of the integrated representation.
    pub fn repr_dim(&self) -> usize {
        2 * self.embed_dim() + 3
    }

    pub(crate) fn networks(&self) -> [&MlpParams; 5] {
        [&self.trunk, &self.type_head, &self.fullness_head, &self.temporal, &self.order_head]
    }

    /// Trunk embeddings of 32×32 images, row-major `images.len() × embed_dim`.
    pub fn embed(&self, images: &[&RgbImage]) -> Result<Vec<f64>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let mut x = Vec::with_capacity(images.len() * INPUT_DIM);
        for img in images {
            push_input(img, &mut x);
        }
        Ok(mlp_forward_batch(&self.trunk, &x, images.len())?.0)
    }

    /// Temporal representation from `frames` embeddings in time order.
    pub fn temporal_repr(&self, frame_embeddings: &[f64]) -> Result<Vec<f64>> {
        Ok(mlp_forward_batch(&self.temporal, frame_embeddings, 1)?.0)
    }

    /// Fullness predictions for a batch of embeddings.
    pub fn fullness(&self, embeddings: &[f64]) -> Result<Vec<f64>> {
        let n = embeddings.len() / self.embed_dim();
        Ok(mlp_forward_batch(&self.fullness_head, embeddings, n)?.0)
    }

    /// Type logits for a batch of embeddings.
    pub fn type_logits(&self, embeddings: &[f64]) -> Result<Vec<f64>> {
        let n = embeddings.len() / self.embed_dim();
        Ok(mlp_forward_batch(&self.type_head, embeddings, n)?.0)
    }

    /// Order logits (`frames × frames`, row per input frame) for frames given
    /// in arbitrary order.
    pub fn order_logits(&self, frame_embeddings: &[f64]) -> Result<Vec<f64>> {
        let u = self.temporal_repr(frame_embeddings)?;
        Ok(mlp_forward_batch(&self.order_head, &u, 1)?.0)
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for net in self.networks() {
            write_params(out, net)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Encoder> {
        let enc = Encoder {
            trunk: read_params(input)?,
            type_head: read_params(input)?,
            fullness_head: read_params(input)?,
            temporal: read_params(input)?,
            order_head: read_params(input)?,
        };
        let e = enc.trunk.output_dim();
        let consistent = enc.trunk.input_dim() == INPUT_DIM
            && enc.type_head.input_dim() == e
            && enc.fullness_head.input_dim() == e
            && enc.fullness_head.output_dim() == 1
            && enc.temporal.input_dim().is_multiple_of(e)
            && enc.temporal.output_dim() == e
            && enc.order_head.input_dim() == e
            && enc.order_head.output_dim() == enc.frames() * enc.frames();
        if !consistent {
            return Err(ImrlError::format("checkpoint", "encoder networks have inconsistent shapes"));
        }
        Ok(enc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| ImrlError::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out).and_then(|_| out.flush()).map_err(|e| ImrlError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Encoder> {
        let file = fs::File::open(path).map_err(|e| ImrlError::io(path, e))?;
        Encoder::read(&mut BufReader::new(file))
    }
}

/// Which parts of the integrated representation are kept, and the geometry
/// parameters used to find the scoop point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub zero_temporal: bool,
    pub zero_geometric: bool,
    pub density_radius: usize,
    pub scoop_margin: f64,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            zero_temporal: false,
            zero_geometric: false,
            density_radius: 9,
            scoop_margin: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratedRepresentation {
    pub z_vp: Vec<f64>,
    pub z_u: Vec<f64>,
    /// Scoop point in `[0, 1]²` (pixel / (frame − 1)).
    pub scoop_point: (f64, f64),
    pub fullness: f64,
    /// Set when no feasible scoop point existed and the mask centroid (or
    /// the frame centre, for an empty mask) was used instead.
    pub fallback: bool,
}

impl IntegratedRepresentation {
    /// `z_vp ⊕ z_u ⊕ (x*, y*) ⊕ l̂`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.z_vp.len() + self.z_u.len() + 3);
        v.extend_from_slice(&self.z_vp);
        v.extend_from_slice(&self.z_u);
        v.extend([self.scoop_point.0, self.scoop_point.1, self.fullness]);
        v
    }
}

/// Current environment frame plus the last `frames` hand images, oldest
/// first.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationWindow {
    pub env: RgbImage,
    pub hands: Vec<RgbImage>,
}

/// Normalised scoop point of `mask`, with the fallback flag.
pub fn geometric_input(mask: &BinaryMask, opts: &EncodeOptions) -> Result<((f64, f64), bool)> {
    let scale = (FRAME - 1) as f64;
    match optimal_scoop_point(mask, opts.density_radius, opts.scoop_margin) {
        Ok(p) => Ok(((p.x as f64 / scale, p.y as f64 / scale), false)),
        Err(ImrlError::NoFeasiblePoint { .. }) => {
            let (cx, cy) = match centroid(mask) {
                Ok(c) => c,
                Err(ImrlError::EmptyMask) => (scale / 2.0, scale / 2.0),
                Err(e) => return Err(e),
            };
            Ok(((cx / scale, cy / scale), true))
        }
        Err(e) => Err(e),
    }
}

/// Builds the representation from precomputed trunk embeddings of the
/// environment frame and of the hand frames (oldest first).
pub fn encode_embedded(
    encoder: &Encoder,
    env_embedding: &[f64],
    hand_embeddings: &[f64],
    mask: &BinaryMask,
    opts: &EncodeOptions,
) -> Result<IntegratedRepresentation> {
    let e = encoder.embed_dim();
    if env_embedding.len() != e || hand_embeddings.len() != e * encoder.frames() {
        return Err(ImrlError::Shape(format!(
            "encoder expects 1 env and {} hand embeddings of dim {e}",
            encoder.frames()
        )));
    }
    let z_u = if opts.zero_temporal {
        vec![0.0; e]
    } else {
        encoder.temporal_repr(hand_embeddings)?
    };
    let (scoop_point, fallback, fullness) = if opts.zero_geometric {
        ((0.0, 0.0), false, 0.0)
    } else {
        let (p, fallback) = geometric_input(mask, opts)?;
        (p, fallback, encoder.fullness(env_embedding)?[0].clamp(0.0, 1.0))
    };
    Ok(IntegratedRepresentation {
        z_vp: env_embedding.to_vec(),
        z_u,
        scoop_point,
        fullness,
        fallback,
    })
}

pub fn encode(
    encoder: &Encoder,
    window: &ObservationWindow,
    mask: &BinaryMask,
    opts: &EncodeOptions,
) -> Result<IntegratedRepresentation> {
    if window.hands.len() != encoder.frames() {
        return Err(ImrlError::Shape(format!(
            "window has {} hand frames, encoder expects {}",
            window.hands.len(),
            encoder.frames()
        )));
    }
    let env = env_input_image(&window.env);
    let mut images = vec![&env];
    images.extend(window.hands.iter());
    let emb = encoder.embed(&images)?;
    let e = encoder.embed_dim();
    encode_embedded(encoder, &emb[..e], &emb[e..], mask, opts)
}
