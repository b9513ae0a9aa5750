use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{env_input_image, push_input, INPUT_DIM};
use super::encoder::{encode_embedded, geometric_input, EncodeOptions, Encoder};
use crate::error::{ImrlError, Result};
use crate::image::RgbImage;
use crate::losses::{bc_nll, GaussianActionHead};
use crate::numeric::checkpoint::{read_params, write_params};
use crate::numeric::{
    init_params, mlp_backward_accumulate, mlp_forward_batch, AdamConfig, AdamState, DenseArray, MlpParams,
};
use crate::seed;
use crate::simworld::{Pose, Trajectory};

pub const ACTION_DIM: usize = 6;

/// Gaussian policy over the next pose given the integrated representation
/// and the last `history_k` poses.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub net: MlpParams,
    pub log_std: Vec<f64>,
    /// Input standardisation fitted on the training inputs.
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub history_k: usize,
}

impl PolicyParams {
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn standardise(&self, x: &mut [f64]) {
        let d = self.input_dim();
        for row in x.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.input_mean).zip(&self.input_std) {
                *v = (*v - m) / s;
            }
        }
    }

    /// Mean action for one raw (unstandardised) input.
    pub fn act(&self, input: &[f64]) -> Result<Pose> {
        let mut x = input.to_vec();
        self.standardise(&mut x);
        let out = mlp_forward_batch(&self.net, &x, 1)?.0;
        let mut a = [0.0; ACTION_DIM];
        for (ai, v) in a.iter_mut().zip(out) {
            *ai = v.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Checkpoint layout: the policy network, then a `[1, 6]` block whose
    /// bias holds `log_std`, then a `[1, in]` block with the standardisation
    /// (weights hold the std, bias the mean), then a `[1, 1]` block whose
    /// bias holds `history_k`.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_params(out, &self.net)?;
        let block = |w: Vec<f64>, b: Vec<f64>| {
            let (n_out, n_in) = (b.len(), w.len() / b.len().max(1));
            MlpParams::from_parts(
                &[n_in, n_out],
                vec![DenseArray::from_vec(&[n_out, n_in], w).expect("sized")],
                vec![DenseArray::from_vec(&[n_out], b).expect("sized")],
            )
            .expect("valid block")
        };
        write_params(out, &block(vec![0.0; ACTION_DIM], self.log_std.clone()))?;
        write_params(out, &block(self.input_std.clone(), self.input_mean.clone()))?;
        write_params(out, &block(vec![0.0], vec![self.history_k as f64]))
    }

    pub fn read<R: Read>(input: &mut R) -> Result<PolicyParams> {
        let net = read_params(input)?;
        let log_std = read_params(input)?.bias(0).data().to_vec();
        let stats = read_params(input)?;
        let k = read_params(input)?.bias(0).data()[0];
        let policy = PolicyParams {
            input_std: stats.weight(0).data().to_vec(),
            input_mean: stats.bias(0).data().to_vec(),
            log_std,
            history_k: k as usize,
            net,
        };
        if policy.log_std.len() != ACTION_DIM
            || policy.net.output_dim() != ACTION_DIM
            || policy.input_mean.len() != policy.input_dim()
            || policy.input_std.len() != policy.input_dim()
            || !(k >= 1.0 && k.fract() == 0.0)
        {
            return Err(ImrlError::format("checkpoint", "policy blocks have inconsistent shapes"));
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| ImrlError::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out).and_then(|_| out.flush()).map_err(|e| ImrlError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<PolicyParams> {
        let file = fs::File::open(path).map_err(|e| ImrlError::io(path, e))?;
        PolicyParams::read(&mut BufReader::new(file))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub history_k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    /// Update the encoder trunk and temporal module with the policy.
    pub finetune_encoder: bool,
    pub finetune_lr: f64,
    /// Std of Gaussian noise added to the standardised z_vp, z_u and fullness
    /// inputs while training.
    pub embed_noise: f64,
    pub encode: EncodeOptions,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            history_k: 4,
            epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            hidden: 128,
            finetune_encoder: true,
            finetune_lr: 1e-4,
            embed_noise: 1.0,
            encode: EncodeOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BcHistory {
    /// Mean NLL over all training samples before any update.
    pub initial_nll: f64,
    /// Mean NLL over the optimisation steps of each epoch.
    pub epoch_nll: Vec<f64>,
}

/// Indices of the `len` most recent items up to `t`, oldest first, padded
/// at the front by repeating the first step of the episode.
pub fn history_indices(t: usize, len: usize) -> Vec<usize> {
    (0..len).map(|i| (t + i + 1).saturating_sub(len)).collect()
}

/// Policy input: representation followed by the pose history, oldest first.
pub fn policy_input(z: &[f64], poses: &[Pose]) -> Vec<f64> {
    let mut x = z.to_vec();
    for p in poses {
        x.extend_from_slice(p);
    }
    x
}

/// Per-step training sample references.
struct Sample {
    traj: usize,
    t: usize,
}

struct Prepared {
    /// Per trajectory: env-frame and hand-frame embeddings, row per step.
    env_emb: Vec<Vec<f64>>,
    hand_emb: Vec<Vec<f64>>,
    /// Scoop point of every step's mask.
    geometry: Vec<Vec<(f64, f64)>>,
}

fn embed_all(encoder: &Encoder, images: &[RgbImage]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len() * encoder.embed_dim());
    for chunk in images.chunks(128) {
        let refs: Vec<&RgbImage> = chunk.iter().collect();
        out.extend(encoder.embed(&refs)?);
    }
    Ok(out)
}

fn prepare(encoder: &Encoder, demos: &[Trajectory], opts: &EncodeOptions) -> Result<Prepared> {
    let mut p = Prepared {
        env_emb: Vec::new(),
        hand_emb: Vec::new(),
        geometry: Vec::new(),
    };
    for traj in demos {
        let envs: Vec<RgbImage> = traj.steps.iter().map(|s| env_input_image(&s.obs.env)).collect();
        let hands: Vec<RgbImage> = traj.steps.iter().map(|s| s.obs.hand.clone()).collect();
        p.env_emb.push(embed_all(encoder, &envs)?);
        p.hand_emb.push(embed_all(encoder, &hands)?);
        p.geometry.push(
            traj.steps
                .iter()
                .map(|s| geometric_input(&s.obs.mask, opts).map(|(g, _)| g))
                .collect::<Result<_>>()?,
        );
    }
    Ok(p)
}

fn representation(
    encoder: &Encoder,
    prep: &Prepared,
    demos: &[Trajectory],
    s: &Sample,
    opts: &EncodeOptions,
) -> Result<Vec<f64>> {
    let e = encoder.embed_dim();
    let traj = &demos[s.traj];
    let hands: Vec<f64> = history_indices(s.t, encoder.frames())
        .into_iter()
        .flat_map(|i| prep.hand_emb[s.traj][i * e..(i + 1) * e].iter().copied())
        .collect();
    let env = &prep.env_emb[s.traj][s.t * e..(s.t + 1) * e];
    let mut z = encode_embedded(encoder, env, &hands, &traj.steps[s.t].obs.mask, opts)?;
    if !opts.zero_geometric {
        z.scoop_point = prep.geometry[s.traj][s.t];
    }
    Ok(z.to_vec())
}

fn poses(demos: &[Trajectory], s: &Sample, k: usize) -> Vec<Pose> {
    history_indices(s.t, k)
        .into_iter()
        .map(|i| demos[s.traj].steps[i].obs.proprio)
        .collect()
}

/// Per-feature mean; the std is shared within each embedding block (z_vp,
/// z_u) so that directions the demos barely excite are not blown up, and
/// per-feature elsewhere.
fn fit_standardisation(inputs: &[f64], dim: usize, embed_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (inputs.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    let mut var = vec![0.0; dim];
    for row in inputs.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    for row in inputs.chunks_exact(dim) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for block in [0..embed_dim, embed_dim..2 * embed_dim] {
        let shared = var[block.clone()].iter().sum::<f64>() / embed_dim as f64;
        var[block].iter_mut().for_each(|v| *v = shared);
    }
    let std = var.into_iter().map(|v| if v.sqrt() > 1e-6 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

/// Adds noise to the learned parts of every row: the two embedding blocks
/// and the fullness estimate.
fn perturb_embeddings(x: &mut [f64], in_dim: usize, embed_dim: usize, sigma: f64, rng: &mut seed::Rng) {
    if sigma == 0.0 {
        return;
    }
    let fullness = 2 * embed_dim + 2;
    for row in x.chunks_exact_mut(in_dim) {
        for i in (0..2 * embed_dim).chain([fullness]) {
            let n: f64 = rng.sample(StandardNormal);
            row[i] += sigma * n;
        }
    }
}

/// NLL of a batch of standardised inputs; accumulates gradients and returns
/// the input gradient when `grads` is given.
fn nll_batch(
    policy: &PolicyParams,
    x: &[f64],
    actions: &[Pose],
    grads: Option<(&mut MlpParams, &mut [f64])>,
) -> Result<(f64, Option<Vec<f64>>)> {
    let b = actions.len();
    let (out, cache) = mlp_forward_batch(&policy.net, x, b)?;
    let mut total = 0.0;
    let mut d_out = Vec::with_capacity(b * ACTION_DIM);
    let mut d_log_std = vec![0.0; ACTION_DIM];
    for (row, a) in out.chunks_exact(ACTION_DIM).zip(actions) {
        let g = bc_nll(
            &GaussianActionHead {
                mean: row.to_vec(),
                log_std: policy.log_std.clone(),
            },
            a,
        )?;
        total += g.loss / b as f64;
        d_out.extend(g.mean.iter().map(|v| v / b as f64));
        for (d, v) in d_log_std.iter_mut().zip(&g.log_std) {
            *d += v / b as f64;
        }
    }
    let Some((net_grads, log_std_grads)) = grads else {
        return Ok((total, None));
    };
    log_std_grads.iter_mut().zip(&d_log_std).for_each(|(d, v)| *d += v);
    let dx = mlp_backward_accumulate(&policy.net, &cache, &d_out, net_grads, true)?;
    Ok((total, dx))
}

/// Behavior cloning: fits the policy to the demonstrated actions by
/// minimising the Gaussian NLL. With `finetune_encoder` the trunk and the
/// temporal module receive gradients through the representation.
pub fn train_bc(
    demos: &[Trajectory],
    encoder: &Encoder,
    cfg: &BcConfig,
) -> Result<(PolicyParams, Encoder, BcHistory)> {
    if demos.iter().all(|d| d.steps.is_empty()) {
        return Err(ImrlError::config("demos", "no demonstration steps"));
    }
    if cfg.history_k == 0 {
        return Err(ImrlError::config("history_k", "must be >= 1"));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 {
        return Err(ImrlError::config("batch_size", "batch size and hidden width must be >= 1"));
    }
    let opts = cfg.encode;
    let samples: Vec<Sample> = demos
        .iter()
        .enumerate()
        .flat_map(|(traj, d)| (0..d.steps.len()).map(move |t| Sample { traj, t }))
        .collect();
    let mut encoder = encoder.clone();
    let prep = prepare(&encoder, demos, &opts)?;
    let in_dim = encoder.repr_dim() + ACTION_DIM * cfg.history_k;
    let mut inputs = Vec::with_capacity(samples.len() * in_dim);
    for s in &samples {
        let z = representation(&encoder, &prep, demos, s, &opts)?;
        inputs.extend(policy_input(&z, &poses(demos, s, cfg.history_k)));
    }
    let (input_mean, input_std) = fit_standardisation(&inputs, in_dim, encoder.embed_dim());
    let mut policy = PolicyParams {
        net: init_params(&[in_dim, cfg.hidden, cfg.hidden, ACTION_DIM], seed::derive(cfg.seed, "policy-init"))?,
        log_std: vec![0.0; ACTION_DIM],
        input_mean,
        input_std,
        history_k: cfg.history_k,
    };
    policy.standardise(&mut inputs);
    let actions: Vec<Pose> = samples.iter().map(|s| demos[s.traj].steps[s.t].action).collect();

    let mut history = BcHistory {
        initial_nll: nll_batch(&policy, &inputs, &actions, None)?.0,
        epoch_nll: Vec::with_capacity(cfg.epochs),
    };
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut net_opt = AdamState::for_mlp(&policy.net, adam);
    let mut std_opt = AdamState::new(&[ACTION_DIM], adam);
    let tune = AdamConfig {
        lr: cfg.finetune_lr,
        ..AdamConfig::default()
    };
    let mut trunk_opt = AdamState::for_mlp(&encoder.trunk, tune);
    let mut temporal_opt = AdamState::for_mlp(&encoder.temporal, tune);
    let mut rng = seed::rng(seed::derive(cfg.seed, "bc-train"));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_actions: Vec<Pose> = chunk.iter().map(|&i| actions[i]).collect();
            let mut net_grads = policy.net.zeros_like();
            let mut std_grads = vec![0.0; ACTION_DIM];
            let loss = if cfg.finetune_encoder {
                finetune_step(
                    &mut encoder,
                    &policy,
                    demos,
                    &prep,
                    &samples,
                    chunk,
                    &batch_actions,
                    &opts,
                    (&mut net_grads, &mut std_grads),
                    (&mut trunk_opt, &mut temporal_opt),
                    (&mut rng, cfg.embed_noise),
                )?
            } else {
                let mut x = Vec::with_capacity(chunk.len() * in_dim);
                for &i in chunk {
                    x.extend_from_slice(&inputs[i * in_dim..(i + 1) * in_dim]);
                }
                perturb_embeddings(&mut x, in_dim, encoder.embed_dim(), cfg.embed_noise, &mut rng);
                nll_batch(&policy, &x, &batch_actions, Some((&mut net_grads, &mut std_grads)))?.0
            };
            net_opt.step_mlp(&mut policy.net, &net_grads)?;
            std_opt.step(&mut [&mut policy.log_std], &[&std_grads])?;
            total += loss;
            steps += 1;
        }
        history.epoch_nll.push(total / steps as f64);
    }
    Ok((policy, encoder, history))
}

/// One fine-tuning step: recomputes the representation of the batch with
/// the current encoder, backpropagates the NLL into z_vp and z_u, and
/// updates the trunk and temporal module.
#[allow(clippy::too_many_arguments)]
fn finetune_step(
    encoder: &mut Encoder,
    policy: &PolicyParams,
    demos: &[Trajectory],
    prep: &Prepared,
    samples: &[Sample],
    chunk: &[usize],
    actions: &[Pose],
    opts: &EncodeOptions,
    grads: (&mut MlpParams, &mut [f64]),
    optims: (&mut AdamState, &mut AdamState),
    noise: (&mut seed::Rng, f64),
) -> Result<f64> {
    let e = encoder.embed_dim();
    let n = encoder.frames();
    let b = chunk.len();
    let k = policy.history_k;
    // Images: the env frame of every sample, then its n hand frames.
    let mut x_img = Vec::with_capacity(b * (n + 1) * INPUT_DIM);
    for &i in chunk {
        let s = &samples[i];
        push_input(&env_input_image(&demos[s.traj].steps[s.t].obs.env), &mut x_img);
    }
    for &i in chunk {
        let s = &samples[i];
        for h in history_indices(s.t, n) {
            push_input(&demos[s.traj].steps[h].obs.hand, &mut x_img);
        }
    }
    let (emb, trunk_cache) = mlp_forward_batch(&encoder.trunk, &x_img, b * (n + 1))?;
    let (env_emb, hand_emb) = emb.split_at(b * e);
    let (z_u, temporal_cache) = mlp_forward_batch(&encoder.temporal, hand_emb, b)?;
    let fullness = encoder.fullness(env_emb)?;
    let in_dim = policy.input_dim();
    let mut x = Vec::with_capacity(b * in_dim);
    for (r, &i) in chunk.iter().enumerate() {
        let s = &samples[i];
        let mut z = env_emb[r * e..(r + 1) * e].to_vec();
        if opts.zero_temporal {
            z.extend(std::iter::repeat_n(0.0, e));
        } else {
            z.extend_from_slice(&z_u[r * e..(r + 1) * e]);
        }
        if opts.zero_geometric {
            z.extend([0.0; 3]);
        } else {
            let g = prep.geometry[s.traj][s.t];
            z.extend([g.0, g.1, fullness[r].clamp(0.0, 1.0)]);
        }
        x.extend(policy_input(&z, &poses(demos, s, k)));
    }
    policy.standardise(&mut x);
    perturb_embeddings(&mut x, in_dim, e, noise.1, noise.0);
    let (loss, dx) = nll_batch(policy, &x, actions, Some(grads))?;
    let dx = dx.expect("input gradient requested");
    let mut d_emb = vec![0.0; emb.len()];
    let mut d_u = vec![0.0; b * e];
    for r in 0..b {
        for j in 0..e {
            d_emb[r * e + j] = dx[r * in_dim + j] / policy.input_std[j];
            d_u[r * e + j] = dx[r * in_dim + e + j] / policy.input_std[e + j];
        }
    }
    let mut temporal_grads = encoder.temporal.zeros_like();
    if !opts.zero_temporal {
        let d_hand = mlp_backward_accumulate(&encoder.temporal, &temporal_cache, &d_u, &mut temporal_grads, true)?
            .expect("requested");
        d_emb[b * e..].copy_from_slice(&d_hand);
    }
    let mut trunk_grads = encoder.trunk.zeros_like();
    mlp_backward_accumulate(&encoder.trunk, &trunk_cache, &d_emb, &mut trunk_grads, false)?;
    let (trunk_opt, temporal_opt) = optims;
    trunk_opt.step_mlp(&mut encoder.trunk, &trunk_grads)?;
    if !opts.zero_temporal {
        temporal_opt.step_mlp(&mut encoder.temporal, &temporal_grads)?;
    }
    Ok(loss)
}

/// Runs the policy in closed loop, keeping the embedding history so every
/// frame goes through the trunk once.
pub struct PolicyController<'a> {
    policy: &'a PolicyParams,
    encoder: &'a Encoder,
    opts: EncodeOptions,
    hand_emb: Vec<Vec<f64>>,
    poses: Vec<Pose>,
}

impl<'a> PolicyController<'a> {
    pub fn new(policy: &'a PolicyParams, encoder: &'a Encoder, opts: EncodeOptions) -> Result<Self> {
        if policy.input_dim() != encoder.repr_dim() + ACTION_DIM * policy.history_k {
            return Err(ImrlError::Shape(format!(
                "policy expects {} inputs, encoder gives {} + {}·{}",
                policy.input_dim(),
                encoder.repr_dim(),
                ACTION_DIM,
                policy.history_k
            )));
        }
        Ok(PolicyController {
            policy,
            encoder,
            opts,
            hand_emb: Vec::new(),
            poses: Vec::new(),
        })
    }

    pub fn act(&mut self, obs: &crate::simworld::Observation) -> Result<Pose> {
        let e = self.encoder.embed_dim();
        let env = env_input_image(&obs.env);
        let emb = self.encoder.embed(&[&env, &obs.hand])?;
        self.hand_emb.push(emb[e..].to_vec());
        self.poses.push(obs.proprio);
        let t = self.poses.len() - 1;
        let hands: Vec<f64> = history_indices(t, self.encoder.frames())
            .into_iter()
            .flat_map(|i| self.hand_emb[i].iter().copied())
            .collect();
        let z = encode_embedded(self.encoder, &emb[..e], &hands, &obs.mask, &self.opts)?;
        let poses: Vec<Pose> = history_indices(t, self.policy.history_k)
            .into_iter()
            .map(|i| self.poses[i])
            .collect();
        self.policy.act(&policy_input(&z.to_vec(), &poses))
    }
}
