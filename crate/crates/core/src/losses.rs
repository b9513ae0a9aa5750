//! Representation-learning and behavior-cloning objectives, each returning
//! its value together with the exact gradient.

use crate::error::{ImrlError, Result};

/// `log_std` is clamped to this range before use.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn softmax_in_place(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

/// `−log softmax(logits)[label]`; gradient is `softmax − one_hot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(ImrlError::Label(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let mut grad = vec![0.0; logits.len()];
    let log_z = softmax_in_place(logits, &mut grad);
    let loss = log_z - logits[label];
    grad[label] -= 1.0;
    Ok((loss, grad))
}

pub fn l2_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(ImrlError::Shape(format!(
            "distance between vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Debug)]
pub struct TripletBatch {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletGrads {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Gradient of `‖u − v‖` with respect to `u`; zero where the norm vanishes.
fn unit_difference(u: &[f64], v: &[f64], norm: f64) -> Vec<f64> {
    if norm == 0.0 {
        return vec![0.0; u.len()];
    }
    u.iter().zip(v).map(|(a, b)| (a - b) / norm).collect()
}

/// Hinge `max(0, d(A,P) − d(A,N) + α)` with L2 distances.
pub fn triplet_loss(batch: &TripletBatch) -> Result<TripletGrads> {
    let TripletBatch {
        anchor,
        positive,
        negative,
        margin,
    } = batch;
    if !(*margin >= 0.0) {
        return Err(ImrlError::config("margin_alpha", "margin must be >= 0"));
    }
    let d_ap = l2_distance(anchor, positive)?;
    let d_an = l2_distance(anchor, negative)?;
    let value = d_ap - d_an + margin;
    let dim = anchor.len();
    if value <= 0.0 {
        return Ok(TripletGrads {
            loss: 0.0,
            anchor: vec![0.0; dim],
            positive: vec![0.0; dim],
            negative: vec![0.0; dim],
        });
    }
    let g_ap = unit_difference(anchor, positive, d_ap);
    let g_an = unit_difference(anchor, negative, d_an);
    Ok(TripletGrads {
        loss: value,
        anchor: g_ap.iter().zip(&g_an).map(|(p, n)| p - n).collect(),
        positive: g_ap.iter().map(|p| -p).collect(),
        negative: g_an,
    })
}

/// Mean hinge over a set of triplets.
pub fn triplet_loss_mean(batches: &[TripletBatch]) -> Result<(f64, Vec<TripletGrads>)> {
    if batches.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let scale = 1.0 / batches.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(batches.len());
    for b in batches {
        let mut g = triplet_loss(b)?;
        total += g.loss;
        for v in g
            .anchor
            .iter_mut()
            .chain(g.positive.iter_mut())
            .chain(g.negative.iter_mut())
        {
            *v *= scale;
        }
        grads.push(g);
    }
    Ok((total * scale, grads))
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &i in p {
        if i >= p.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Frame-order loss: row `j` of the `N×N` logit grid scores the position of
/// frame `j`; the loss is the summed cross-entropy over frames.
pub fn temporal_order_loss(order_logits: &[f64], true_positions: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = true_positions.len();
    if order_logits.len() != n * n {
        return Err(ImrlError::Shape(format!(
            "{} order logits for {n} frames",
            order_logits.len()
        )));
    }
    if !is_permutation(true_positions) {
        return Err(ImrlError::Label(format!(
            "{true_positions:?} is not a permutation of 0..{n}"
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * n);
    for (row, &pos) in order_logits.chunks_exact(n).zip(true_positions) {
        let (l, g) = softmax_cross_entropy(row, pos)?;
        loss += l;
        grad.extend(g);
    }
    Ok((loss, grad))
}

/// Squared error `(l̂ − l*)²` against a fullness target in `[0, 1]`.
pub fn fullness_mse(pred: f64, target: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&target) {
        return Err(ImrlError::Label(format!(
            "fullness target {target} outside [0, 1]"
        )));
    }
    let diff = pred - target;
    Ok((diff * diff, 2.0 * diff))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub ce: f64,
    pub tri: f64,
    pub temp: f64,
    pub full: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            ce: 1.0,
            tri: 1.0,
            temp: 1.0,
            full: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("lambda_ce", self.ce),
            ("lambda_tri", self.tri),
            ("lambda_temp", self.temp),
            ("lambda_full", self.full),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ImrlError::config(key, format!("weight {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn all_zero(&self) -> bool {
        self.ce == 0.0 && self.tri == 0.0 && self.temp == 0.0 && self.full == 0.0
    }
}

/// `λ_CE·L_CE + λ_tri·L_tri + λ_temp·L_temp + λ_full·L_full`.
pub fn combined_repr_loss(
    l_ce: f64,
    l_tri: f64,
    l_temp: f64,
    l_full: f64,
    weights: &LossWeights,
) -> Result<f64> {
    weights.validate()?;
    Ok(weights.ce * l_ce + weights.tri * l_tri + weights.temp * l_temp + weights.full * l_full)
}

/// Diagonal Gaussian over the 6-D action.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianActionHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NllGrads {
    pub loss: f64,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// Negative log-likelihood of `action` under the head:
/// `Σ ½((a−μ)/σ)² + log σ + ½ log 2π`.
pub fn bc_nll(head: &GaussianActionHead, action: &[f64]) -> Result<NllGrads> {
    if head.mean.len() != action.len() || head.log_std.len() != action.len() {
        return Err(ImrlError::Shape(format!(
            "head of dim {}/{} against action of dim {}",
            head.mean.len(),
            head.log_std.len(),
            action.len()
        )));
    }
    let dim = action.len();
    let mut loss = 0.0;
    let mut g_mean = Vec::with_capacity(dim);
    let mut g_log_std = Vec::with_capacity(dim);
    for d in 0..dim {
        let raw = head.log_std[d];
        let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let inv_var = (-2.0 * log_std).exp();
        let diff = action[d] - head.mean[d];
        let sq = diff * diff * inv_var;
        loss += 0.5 * sq + log_std + HALF_LN_2PI;
        g_mean.push(-diff * inv_var);
        let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
        g_log_std.push(if inside { 1.0 - sq } else { 0.0 });
    }
    Ok(NllGrads {
        loss,
        mean: g_mean,
        log_std: g_log_std,
    })
}
