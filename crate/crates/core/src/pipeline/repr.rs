use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::{push_input, shuffle_frames, FoodImageDataset, Split, INPUT_DIM};
use super::encoder::{Encoder, EncoderConfig};
use crate::error::{ImrlError, Result};
use crate::image::RgbImage;
use crate::losses::{
    fullness_mse, softmax_cross_entropy, temporal_order_loss, triplet_loss_mean, LossWeights,
    TripletBatch,
};
use crate::numeric::{mlp_backward_accumulate, mlp_forward_batch, AdamConfig, AdamState, MlpParams};
use crate::seed;
use crate::simworld::Trajectory;

/// Hand frames from one attempt, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub frames: Vec<RgbImage>,
}

/// Splits every trajectory into attempts and samples `per_attempt` clips of
/// `frames` time-ordered hand frames from each.
pub fn clips_from_demos(demos: &[Trajectory], frames: usize, per_attempt: usize, seed: u64) -> Result<Vec<Clip>> {
    if frames < 2 {
        return Err(ImrlError::config("temporal_frames", "need at least 2 frames"));
    }
    let mut rng = seed::rng(seed::derive(seed, "clips"));
    let mut clips = Vec::new();
    for traj in demos {
        let mut attempt: Vec<&RgbImage> = Vec::new();
        for step in &traj.steps {
            attempt.push(&step.obs.hand);
            if step.outcome.attempt.is_none() {
                continue;
            }
            if attempt.len() >= frames {
                for _ in 0..per_attempt {
                    let mut picked = index::sample(&mut rng, attempt.len(), frames).into_vec();
                    picked.sort_unstable();
                    clips.push(Clip {
                        frames: picked.iter().map(|&i| attempt[i].clone()).collect(),
                    });
                }
            }
            attempt.clear();
        }
    }
    Ok(clips)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReprTrainConfig {
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Clips per optimisation step for the order pretext task.
    pub clip_batch: usize,
    pub lr: f64,
    pub margin: f64,
    /// Mine batch-hard triplets instead of sampling them at random.
    pub hard_mining: bool,
    pub seed: u64,
}

impl Default for ReprTrainConfig {
    fn default() -> Self {
        ReprTrainConfig {
            encoder: EncoderConfig::default(),
            epochs: 30,
            batch_size: 32,
            clip_batch: 8,
            lr: 1e-3,
            margin: 0.2,
            hard_mining: false,
            seed: 0,
        }
    }
}

/// Unweighted loss terms, each averaged over its batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub ce: f64,
    pub tri: f64,
    pub temp: f64,
    pub full: f64,
}

impl LossParts {
    pub fn combined(&self, w: &LossWeights) -> f64 {
        w.ce * self.ce + w.tri * self.tri + w.temp * self.temp + w.full * self.full
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReprHistory {
    /// Mean weighted loss over the optimisation steps of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Weighted loss on a fixed batch before training and after each epoch.
    pub frozen_loss: Vec<f64>,
    pub frozen_parts: Vec<LossParts>,
}

type Grads = [MlpParams; 5];

fn zero_grads(enc: &Encoder) -> Grads {
    enc.networks().map(|n| n.zeros_like())
}

/// Triplets as positions within a batch.
fn sample_triplets(properties: &[usize], rng: &mut seed::Rng) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (a, &pa) in properties.iter().enumerate() {
        let pos: Vec<usize> = (0..properties.len()).filter(|&j| j != a && properties[j] == pa).collect();
        let neg: Vec<usize> = (0..properties.len()).filter(|&j| properties[j] != pa).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        out.push((a, pos[rng.random_range(0..pos.len())], neg[rng.random_range(0..neg.len())]));
    }
    out
}

struct ImageBatch<'a> {
    images: Vec<&'a RgbImage>,
    types: Vec<usize>,
    fullness: Vec<f64>,
    triplets: Vec<(usize, usize, usize)>,
    /// Property labels when triplets are mined from the current embeddings
    /// instead of using `triplets`.
    mining: Option<Vec<usize>>,
}

/// Batch-hard triplets: for every anchor, its farthest same-property and
/// nearest other-property sample.
fn hardest_triplets(z: &[f64], e: usize, properties: &[usize]) -> Vec<(usize, usize, usize)> {
    let n = properties.len();
    let dist = |i: usize, j: usize| -> f64 {
        z[i * e..(i + 1) * e]
            .iter()
            .zip(&z[j * e..(j + 1) * e])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut out = Vec::new();
    for a in 0..n {
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| j != a) {
            let d = dist(a, j);
            if properties[j] == properties[a] {
                if pos.is_none_or(|(_, best)| d > best) {
                    pos = Some((j, d));
                }
            } else if neg.is_none_or(|(_, best)| d < best) {
                neg = Some((j, d));
            }
        }
        if let (Some((p, _)), Some((q, _))) = (pos, neg) {
            out.push((a, p, q));
        }
    }
    out
}

fn image_batch<'a>(ds: &'a FoodImageDataset, idx: &[usize], rng: &mut seed::Rng) -> ImageBatch<'a> {
    let properties: Vec<usize> = idx.iter().map(|&i| ds.property_labels[i]).collect();
    ImageBatch {
        images: idx.iter().map(|&i| &ds.images[i]).collect(),
        types: idx.iter().map(|&i| ds.type_labels[i]).collect(),
        fullness: idx.iter().map(|&i| ds.fullness[i]).collect(),
        triplets: sample_triplets(&properties, rng),
        mining: None,
    }
}

fn image_input(images: &[&RgbImage]) -> Vec<f64> {
    let mut x = Vec::with_capacity(images.len() * INPUT_DIM);
    for img in images {
        push_input(img, &mut x);
    }
    x
}

/// Loss terms of an image batch; accumulates weighted gradients when
/// `grads` is given.
fn image_losses(
    enc: &Encoder,
    batch: &ImageBatch<'_>,
    w: &LossWeights,
    margin: f64,
    grads: Option<&mut Grads>,
) -> Result<LossParts> {
    let b = batch.images.len();
    let e = enc.embed_dim();
    let (z, trunk_cache) = mlp_forward_batch(&enc.trunk, &image_input(&batch.images), b)?;
    let (logits, type_cache) = mlp_forward_batch(&enc.type_head, &z, b)?;
    let (pred, full_cache) = mlp_forward_batch(&enc.fullness_head, &z, b)?;
    let t = enc.num_types();
    let mut parts = LossParts::default();
    let mut d_logits = Vec::with_capacity(b * t);
    let mut d_pred = Vec::with_capacity(b);
    for i in 0..b {
        let (l, g) = softmax_cross_entropy(&logits[i * t..(i + 1) * t], batch.types[i])?;
        parts.ce += l / b as f64;
        d_logits.extend(g.into_iter().map(|v| v * w.ce / b as f64));
        let (l, g) = fullness_mse(pred[i], batch.fullness[i])?;
        parts.full += l / b as f64;
        d_pred.push(g * w.full / b as f64);
    }
    let row = |i: usize| z[i * e..(i + 1) * e].to_vec();
    let mined;
    let chosen = match &batch.mining {
        Some(properties) => {
            mined = hardest_triplets(&z, e, properties);
            &mined
        }
        None => &batch.triplets,
    };
    let triplets: Vec<TripletBatch> = chosen
        .iter()
        .map(|&(a, p, n)| TripletBatch {
            anchor: row(a),
            positive: row(p),
            negative: row(n),
            margin,
        })
        .collect();
    let (tri, tri_grads) = triplet_loss_mean(&triplets)?;
    parts.tri = tri;
    let Some(grads) = grads else {
        return Ok(parts);
    };
    let mut dz = vec![0.0; b * e];
    if w.ce != 0.0 {
        let g = mlp_backward_accumulate(&enc.type_head, &type_cache, &d_logits, &mut grads[1], true)?.expect("requested");
        dz.iter_mut().zip(g).for_each(|(d, v)| *d += v);
    }
    if w.full != 0.0 {
        let g = mlp_backward_accumulate(&enc.fullness_head, &full_cache, &d_pred, &mut grads[2], true)?
            .expect("requested");
        dz.iter_mut().zip(g).for_each(|(d, v)| *d += v);
    }
    if w.tri != 0.0 {
        for (&(a, p, n), g) in chosen.iter().zip(&tri_grads) {
            for (slot, gv) in [(a, &g.anchor), (p, &g.positive), (n, &g.negative)] {
                for (d, v) in dz[slot * e..(slot + 1) * e].iter_mut().zip(gv) {
                    *d += w.tri * v;
                }
            }
        }
    }
    if dz.iter().any(|&v| v != 0.0) {
        mlp_backward_accumulate(&enc.trunk, &trunk_cache, &dz, &mut grads[0], false)?;
    }
    Ok(parts)
}

/// A shuffled clip: frames in shuffled order and their original positions.
type ShuffledClip<'a> = (Vec<&'a RgbImage>, Vec<usize>);

fn shuffled_clip(clip: &Clip, seed: u64) -> Result<ShuffledClip<'_>> {
    let refs: Vec<&RgbImage> = clip.frames.iter().collect();
    shuffle_frames(&refs, seed)
}

/// Mean order loss over the clips; accumulates weighted gradients when
/// `grads` is given.
fn temporal_losses(enc: &Encoder, clips: &[ShuffledClip<'_>], weight: f64, grads: Option<&mut Grads>) -> Result<f64> {
    if clips.is_empty() {
        return Ok(0.0);
    }
    let n = enc.frames();
    let c = clips.len();
    let mut frames = Vec::with_capacity(c * n);
    for (f, pos) in clips {
        if f.len() != n || pos.len() != n {
            return Err(ImrlError::Shape(format!("clip has {} frames, encoder expects {n}", f.len())));
        }
        frames.extend(f.iter().copied());
    }
    let (z, trunk_cache) = mlp_forward_batch(&enc.trunk, &image_input(&frames), c * n)?;
    let (u, temporal_cache) = mlp_forward_batch(&enc.temporal, &z, c)?;
    let (logits, order_cache) = mlp_forward_batch(&enc.order_head, &u, c)?;
    let mut loss = 0.0;
    let mut d_logits = Vec::with_capacity(c * n * n);
    for (i, (_, pos)) in clips.iter().enumerate() {
        let (l, g) = temporal_order_loss(&logits[i * n * n..(i + 1) * n * n], pos)?;
        loss += l / c as f64;
        d_logits.extend(g.into_iter().map(|v| v * weight / c as f64));
    }
    if let Some(grads) = grads {
        if weight != 0.0 {
            let du = mlp_backward_accumulate(&enc.order_head, &order_cache, &d_logits, &mut grads[4], true)?
                .expect("requested");
            let dz = mlp_backward_accumulate(&enc.temporal, &temporal_cache, &du, &mut grads[3], true)?
                .expect("requested");
            mlp_backward_accumulate(&enc.trunk, &trunk_cache, &dz, &mut grads[0], false)?;
        }
    }
    Ok(loss)
}

fn frozen_parts(
    enc: &Encoder,
    batch: &ImageBatch<'_>,
    clips: &[ShuffledClip<'_>],
    w: &LossWeights,
    margin: f64,
) -> Result<LossParts> {
    let mut parts = image_losses(enc, batch, w, margin, None)?;
    parts.temp = temporal_losses(enc, clips, w.temp, None)?;
    Ok(parts)
}

/// Pretrains the encoder on the image dataset (type, triplet and fullness
/// terms) and on demo clips (frame-order term), minimising the weighted sum
/// with Adam.
pub fn train_repr(
    dataset: &FoodImageDataset,
    clips: &[Clip],
    weights: &LossWeights,
    cfg: &ReprTrainConfig,
) -> Result<(Encoder, ReprHistory)> {
    weights.validate()?;
    let train = dataset.indices(Split::Train);
    if train.is_empty() {
        return Err(ImrlError::config("dataset", "training split is empty"));
    }
    if weights.temp > 0.0 && clips.is_empty() {
        return Err(ImrlError::config("demos", "frame-order term needs demo clips"));
    }
    if cfg.batch_size == 0 || cfg.clip_batch == 0 {
        return Err(ImrlError::config("batch_size", "must be >= 1"));
    }
    let enc_cfg = EncoderConfig {
        num_types: dataset.num_types(),
        ..cfg.encoder
    };
    let mut enc = Encoder::new(enc_cfg, seed::derive(cfg.seed, "encoder-init"))?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "repr-train"));

    let mut frozen_rng = seed::rng(seed::derive(cfg.seed, "repr-frozen"));
    let mut frozen_idx = train.clone();
    frozen_idx.shuffle(&mut frozen_rng);
    frozen_idx.truncate(64);
    let frozen_batch = image_batch(dataset, &frozen_idx, &mut frozen_rng);
    let frozen_clips = if weights.temp > 0.0 {
        clips
            .iter()
            .take(16)
            .enumerate()
            .map(|(i, c)| shuffled_clip(c, seed::derive_indexed(cfg.seed, "frozen-clip", i as u64)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut history = ReprHistory::default();
    let record = |enc: &Encoder, history: &mut ReprHistory| -> Result<()> {
        let parts = frozen_parts(enc, &frozen_batch, &frozen_clips, weights, cfg.margin)?;
        history.frozen_loss.push(parts.combined(weights));
        history.frozen_parts.push(parts);
        Ok(())
    };
    record(&enc, &mut history)?;

    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut opts: Vec<AdamState> = enc.networks().iter().map(|n| AdamState::for_mlp(n, adam)).collect();
    let mut order = train;
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        // Linear decay to a tenth of the base rate over training.
        let lr = cfg.lr * (1.0 - 0.9 * epoch as f64 / cfg.epochs as f64);
        opts.iter_mut().for_each(|o| o.set_lr(lr));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = image_batch(dataset, chunk, &mut rng);
            if cfg.hard_mining {
                batch.mining = Some(chunk.iter().map(|&i| dataset.property_labels[i]).collect());
            }
            let mut grads = zero_grads(&enc);
            let mut parts = image_losses(&enc, &batch, weights, cfg.margin, Some(&mut grads))?;
            if weights.temp > 0.0 {
                let mut picked = Vec::with_capacity(cfg.clip_batch);
                for _ in 0..cfg.clip_batch {
                    let c = &clips[rng.random_range(0..clips.len())];
                    picked.push(shuffled_clip(c, seed::derive_indexed(cfg.seed, "clip-shuffle", step))?);
                    step += 1;
                }
                parts.temp = temporal_losses(&enc, &picked, weights.temp, Some(&mut grads))?;
            }
            total += parts.combined(weights);
            steps += 1;
            if !weights.all_zero() {
                let nets = [
                    &mut enc.trunk,
                    &mut enc.type_head,
                    &mut enc.fullness_head,
                    &mut enc.temporal,
                    &mut enc.order_head,
                ];
                for ((net, g), opt) in nets.into_iter().zip(&grads).zip(&mut opts) {
                    opt.step_mlp(net, g)?;
                }
            }
        }
        history.epoch_loss.push(total / steps as f64);
        record(&enc, &mut history)?;
    }
    Ok((enc, history))
}

/// Type-classification accuracy on one split.
pub fn type_accuracy(enc: &Encoder, ds: &FoodImageDataset, split: Split) -> Result<f64> {
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(ImrlError::Metrics("split is empty".into()));
    }
    let t = enc.num_types();
    let mut correct = 0usize;
    for chunk in idx.chunks(128) {
        let images: Vec<&RgbImage> = chunk.iter().map(|&i| &ds.images[i]).collect();
        let logits = enc.type_logits(&enc.embed(&images)?)?;
        for (row, &i) in logits.chunks_exact(t).zip(chunk) {
            correct += usize::from(argmax(row) == ds.type_labels[i]);
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Mean absolute error of the fullness head, predictions clamped to [0, 1].
pub fn fullness_mae(enc: &Encoder, images: &[RgbImage], labels: &[f64]) -> Result<f64> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(ImrlError::Metrics("need one label per image and at least one image".into()));
    }
    let mut err = 0.0;
    for (chunk, lab) in images.chunks(128).zip(labels.chunks(128)) {
        let refs: Vec<&RgbImage> = chunk.iter().collect();
        let pred = enc.fullness(&enc.embed(&refs)?)?;
        err += pred.iter().zip(lab).map(|(p, l)| (p.clamp(0.0, 1.0) - l).abs()).sum::<f64>();
    }
    Ok(err / images.len() as f64)
}

/// Share of shuffled frames whose original position is predicted correctly.
pub fn order_accuracy(enc: &Encoder, clips: &[Clip], seed: u64) -> Result<f64> {
    if clips.is_empty() {
        return Err(ImrlError::Metrics("no clips".into()));
    }
    let n = enc.frames();
    let mut correct = 0usize;
    for (i, clip) in clips.iter().enumerate() {
        let (frames, pos) = shuffled_clip(clip, seed::derive_indexed(seed, "order-eval", i as u64))?;
        let logits = enc.order_logits(&enc.embed(&frames)?)?;
        for (row, &p) in logits.chunks_exact(n).zip(&pos) {
            correct += usize::from(argmax(row) == p);
        }
    }
    Ok(correct as f64 / (clips.len() * n) as f64)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
