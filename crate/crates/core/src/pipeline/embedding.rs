use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::{FoodImageDataset, Split};
use super::encoder::Encoder;
use crate::error::{ImrlError, Result};
use crate::image::RgbImage;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetrics {
    /// Mean silhouette with property classes as clusters.
    pub silhouette: f64,
    /// Mean same-property distance over mean cross-property distance.
    pub intra_inter_ratio: f64,
}

fn check_points(points: &[f64], dim: usize, labels: &[usize]) -> Result<usize> {
    if dim == 0 || points.len() != labels.len() * dim {
        return Err(ImrlError::Shape(format!(
            "{} values do not hold {} points of dim {dim}",
            points.len(),
            labels.len()
        )));
    }
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(ImrlError::Metrics("need at least 2 distinct labels".into()));
    }
    Ok(labels.len())
}

fn distance_matrix(points: &[f64], dim: usize) -> Vec<f64> {
    let n = points.len() / dim;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = points[i * dim..(i + 1) * dim]
                .iter()
                .zip(&points[j * dim..(j + 1) * dim])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Mean silhouette coefficient over L2 distances. Points in singleton
/// clusters score 0.
pub fn silhouette(points: &[f64], dim: usize, labels: &[usize]) -> Result<f64> {
    let n = check_points(points, dim, labels)?;
    let d = distance_matrix(points, dim);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; classes];
        let mut count = vec![0usize; classes];
        for j in 0..n {
            if j != i {
                sum[labels[j]] += d[i * n + j];
                count[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let b = (0..classes)
            .filter(|&c| c != own && count[c] > 0)
            .map(|c| sum[c] / count[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean same-label pair distance divided by mean different-label pair
/// distance.
pub fn intra_inter_ratio(points: &[f64], dim: usize, labels: &[usize]) -> Result<f64> {
    let n = check_points(points, dim, labels)?;
    let d = distance_matrix(points, dim);
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                intra += d[i * n + j];
                n_intra += 1;
            } else {
                inter += d[i * n + j];
                n_inter += 1;
            }
        }
    }
    if n_intra == 0 || inter == 0.0 {
        return Err(ImrlError::Metrics("ratio undefined: no same-label pairs or all points coincide".into()));
    }
    Ok((intra / n_intra as f64) / (inter / n_inter as f64))
}

/// Trunk embeddings of one split and their property labels.
pub fn dataset_embeddings(enc: &Encoder, ds: &FoodImageDataset, split: Split) -> Result<(Vec<f64>, Vec<usize>)> {
    let idx = ds.indices(split);
    let mut points = Vec::with_capacity(idx.len() * enc.embed_dim());
    for chunk in idx.chunks(128) {
        let images: Vec<&RgbImage> = chunk.iter().map(|&i| &ds.images[i]).collect();
        points.extend(enc.embed(&images)?);
    }
    Ok((points, idx.iter().map(|&i| ds.property_labels[i]).collect()))
}

pub fn embedding_metrics(enc: &Encoder, ds: &FoodImageDataset, split: Split) -> Result<EmbeddingMetrics> {
    let (points, labels) = dataset_embeddings(enc, ds, split)?;
    let dim = enc.embed_dim();
    Ok(EmbeddingMetrics {
        silhouette: silhouette(&points, dim, &labels)?,
        intra_inter_ratio: intra_inter_ratio(&points, dim, &labels)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub coords: Vec<[f64; 2]>,
    /// KL(P‖Q) at initialisation and after every iteration.
    pub kl_history: Vec<f64>,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_history[0]
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_history.last().expect("history starts with the initial value")
    }
}

pub const TSNE_MAX_POINTS: usize = 1000;

/// Row-conditional affinities with per-point bandwidth found by bisection
/// so each row has the requested perplexity; returned symmetrised and
/// normalised.
fn joint_probabilities(points: &[f64], dim: usize, perplexity: f64) -> Vec<f64> {
    let n = points.len() / dim;
    let d = distance_matrix(points, dim);
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
        let row_d2: Vec<f64> = (0..n).map(|j| d[i * n + j] * d[i * n + j]).collect();
        let min_d2 = (0..n).filter(|&j| j != i).map(|j| row_d2[j]).fold(f64::INFINITY, f64::min);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j != i {
                    let w = (-beta * (row_d2[j] - min_d2)).exp();
                    p[i * n + j] = w;
                    sum += w;
                    weighted += w * (row_d2[j] - min_d2);
                }
            }
            let entropy = sum.ln() + beta * weighted / sum;
            if (entropy - target).abs() < 1e-6 {
                break;
            }
            if entropy > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        let sum: f64 = (0..n).filter(|&j| j != i).map(|j| p[i * n + j]).sum();
        for j in 0..n {
            p[i * n + j] /= sum;
        }
        p[i * n + i] = 0.0;
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
        joint[i * n + i] = 0.0;
    }
    joint
}

/// Student-t affinities of the layout: unnormalised kernel and its sum.
fn low_dim_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

fn kl_divergence(p: &[f64], num: &[f64], sum: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / sum).max(1e-300)).ln())
        .sum()
}

/// Exact t-SNE into two dimensions: gradient descent on KL(P‖Q) with
/// momentum, per-parameter gains and early exaggeration, re-centring the
/// layout after every iteration.
pub fn tsne_2d(points: &[f64], dim: usize, perplexity: f64, iters: usize, seed: u64) -> Result<TsneResult> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(ImrlError::Shape(format!("{} values are not points of dim {dim}", points.len())));
    }
    let n = points.len() / dim;
    if n > TSNE_MAX_POINTS {
        return Err(ImrlError::config("tsne_points", format!("exact t-SNE supports at most {TSNE_MAX_POINTS} points")));
    }
    if !(perplexity > 0.0 && perplexity < n as f64 / 3.0) {
        return Err(ImrlError::config(
            "tsne_perplexity",
            format!("perplexity {perplexity} must be in (0, {n}/3)"),
        ));
    }
    let p = joint_probabilities(points, dim, perplexity);
    let mut rng = seed::rng(seed::derive(seed, "tsne"));
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-1e-2..1e-2), rng.random_range(-1e-2..1e-2)])
        .collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let (lr, exaggeration) = (200.0, 12.0);
    let exaggerated_iters = (iters / 4).min(100);

    let (num, sum) = low_dim_kernel(&y);
    let mut kl_history = vec![kl_divergence(&p, &num, sum)];
    for it in 0..iters {
        let (num, sum) = low_dim_kernel(&y);
        let ex = if it < exaggerated_iters { exaggeration } else { 1.0 };
        let momentum = if it < 250 { 0.5 } else { 0.8 };
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (ex * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
                g[0] += 4.0 * w * (y[i][0] - y[j][0]);
                g[1] += 4.0 * w * (y[i][1] - y[j][1]);
            }
            for c in 0..2 {
                gains[i][c] = if (g[c] > 0.0) != (velocity[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8f64).max(0.01)
                };
                velocity[i][c] = momentum * velocity[i][c] - lr * gains[i][c] * g[c];
            }
        }
        let mut mean = [0.0; 2];
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
            mean[0] += yi[0] / n as f64;
            mean[1] += yi[1] / n as f64;
        }
        for yi in &mut y {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
        let (num, sum) = low_dim_kernel(&y);
        let kl = kl_divergence(&p, &num, sum);
        if !kl.is_finite() {
            return Err(ImrlError::Metrics(format!("t-SNE diverged at iteration {it}")));
        }
        kl_history.push(kl);
    }
    Ok(TsneResult { coords: y, kl_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..n_per {
                for k in 0..5 {
                    let centre = if k == c { 10.0 } else { 0.0 };
                    pts.push(centre + rng.random_range(-0.5..0.5));
                }
                labels.push(c);
            }
        }
        (pts, labels)
    }

    #[test]
    fn perfect_clusters_score_one() {
        let pts = vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0];
        let s = silhouette(&pts, 2, &[0, 0, 1, 1]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(intra_inter_ratio(&pts, 2, &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_score_near_zero() {
        let mut rng = seed::rng(1);
        let pts: Vec<f64> = (0..400 * 4).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        assert!(silhouette(&pts, 4, &labels).unwrap().abs() < 0.05);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(silhouette(&[0.0, 1.0], 1, &[2, 2]), Err(ImrlError::Metrics(_))));
    }

    #[test]
    fn tsne_lowers_kl_and_is_centred() {
        let (pts, _) = blobs(20, 3);
        let r = tsne_2d(&pts, 5, 10.0, 200, 7).unwrap();
        assert!(r.final_kl() < r.initial_kl());
        let mean: f64 = r.coords.iter().map(|c| c[0] + c[1]).sum::<f64>() / 60.0;
        assert!(mean.abs() < 1e-9);
        assert_eq!(r, tsne_2d(&pts, 5, 10.0, 200, 7).unwrap());
    }

    #[test]
    fn duplicates_land_together() {
        let (mut pts, _) = blobs(15, 4);
        let copy = pts[..5].to_vec();
        pts.extend(copy);
        let r = tsne_2d(&pts, 5, 8.0, 300, 1).unwrap();
        let (a, b) = (r.coords[0], r.coords[45]);
        let spread = r.coords.iter().map(|c| c[0].abs().max(c[1].abs())).fold(0.0, f64::max);
        assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 0.05 * spread);
    }

    #[test]
    fn bad_perplexity_rejected() {
        let (pts, _) = blobs(5, 1);
        assert!(matches!(tsne_2d(&pts, 5, 10.0, 10, 0), Err(ImrlError::Config { .. })));
    }
}
