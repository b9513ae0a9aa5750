//! Brute-force references and random inputs shared by the integration
//! tests.
#![allow(dead_code)]

use imrl_core::geometry::BinaryMask;
use imrl_core::seed::Rng;
use rand::Rng as _;

/// Food count and clipped window area by direct enumeration.
pub fn density_ratio(mask: &BinaryMask, r: usize, x: usize, y: usize) -> (u32, u32) {
    let half = (r / 2) as i64;
    let (mut count, mut area) = (0, 0);
    for wy in y as i64 - half..=y as i64 + half {
        for wx in x as i64 - half..=x as i64 + half {
            if wx < 0 || wy < 0 || wx >= mask.width() as i64 || wy >= mask.height() as i64 {
                continue;
            }
            area += 1;
            count += u32::from(mask.get(wx as usize, wy as usize));
        }
    }
    (count, area)
}

fn on_boundary(mask: &BinaryMask, x: usize, y: usize) -> bool {
    let inside = |dx: i64, dy: i64| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        nx >= 0 && ny >= 0 && nx < mask.width() as i64 && ny < mask.height() as i64 && mask.get(nx as usize, ny as usize)
    };
    mask.get(x, y) && !(inside(-1, 0) && inside(1, 0) && inside(0, -1) && inside(0, 1))
}

/// Distance from each food pixel to the nearest boundary pixel, by scanning
/// every boundary pixel; 0 off the mask.
pub fn boundary_distance(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let boundary: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| on_boundary(mask, x, y))
        .collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            out[y * w + x] = boundary
                .iter()
                .map(|&(bx, by)| {
                    let (dx, dy) = (bx as f64 - x as f64, by as f64 - y as f64);
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
        }
    }
    out
}

/// Highest density among pixels farther than `m` from the boundary; ties
/// go to the pixel nearest the centroid, then the first in row-major order.
pub fn scoop_point(mask: &BinaryMask, r: usize, m: f64) -> Option<(usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let food: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| mask.get(x, y)).collect();
    if food.is_empty() {
        return None;
    }
    let n = food.len() as f64;
    let cx = food.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = food.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let dist = boundary_distance(mask);
    let mut best: Option<((usize, usize), (u32, u32), f64)> = None;
    for &(x, y) in &food {
        if dist[y * w + x] <= m {
            continue;
        }
        let d = density_ratio(mask, r, x, y);
        let c = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        let take = match best {
            None => true,
            Some((_, bd, bc)) => {
                let (lhs, rhs) = (u64::from(d.0) * u64::from(bd.1), u64::from(bd.0) * u64::from(d.1));
                lhs > rhs || (lhs == rhs && c < bc)
            }
        };
        if take {
            best = Some(((x, y), d, c));
        }
    }
    best.map(|b| b.0)
}

/// Random mask: a union of disks and rectangles, salt noise, or a thin
/// structure, chosen by `kind % 4`.
pub fn random_mask(rng: &mut Rng, w: usize, h: usize, kind: usize) -> BinaryMask {
    let mut cells = vec![0u8; w * h];
    match kind % 4 {
        0 => {
            for _ in 0..rng.random_range(1..4) {
                let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
                let r = rng.random_range(1.0..(w.min(h) as f64 / 2.0).max(1.5));
                for y in 0..h {
                    for x in 0..w {
                        if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                            cells[y * w + x] = 1;
                        }
                    }
                }
            }
        }
        1 => {
            for _ in 0..rng.random_range(1..4) {
                let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
                let (x1, y1) = (rng.random_range(x0..w), rng.random_range(y0..h));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        cells[y * w + x] = 1;
                    }
                }
            }
        }
        2 => {
            let p = rng.random_range(0.05..0.95);
            for c in &mut cells {
                *c = u8::from(rng.random_bool(p));
            }
        }
        _ => {
            let y = rng.random_range(0..h);
            for x in 0..w {
                cells[y * w + x] = 1;
            }
        }
    }
    BinaryMask::from_cells(w, h, cells).expect("sized")
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub mod grad {
    use imrl_core::losses::{
        bc_nll, combined_repr_loss, fullness_mse, softmax_cross_entropy, temporal_order_loss, triplet_loss,
        GaussianActionHead, LossWeights, TripletBatch,
    };
    use imrl_core::numeric::{finite_diff_grad, init_params, mlp_backward, mlp_forward};
    use imrl_core::seed::Rng;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    use super::rel_error;

    pub const EPS: f64 = 1e-5;

    fn vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    /// Worst relative error of every analytic gradient against central
    /// differences, over `instances` random cases per operation.
    pub fn suite(rng: &mut Rng, instances: usize) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut worst = |name: &'static str, e: f64| match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, w)) => *w = f64::max(*w, e),
            None => out.push((name, e)),
        };
        for _ in 0..instances {
            let c = rng.random_range(2..8);
            let logits = vec(rng, c, 3.0);
            let label = rng.random_range(0..c);
            let (_, g) = softmax_cross_entropy(&logits, label).unwrap();
            let n = finite_diff_grad(|z| softmax_cross_entropy(z, label).unwrap().0, &logits, EPS);
            worst("softmax_cross_entropy", rel_error(&g, &n));

            // Stay away from the hinge and from coincident points.
            let dim = rng.random_range(2..10);
            let (a, p, q, margin) = loop {
                let (a, p, q) = (vec(rng, dim, 1.0), vec(rng, dim, 1.0), vec(rng, dim, 1.0));
                let margin = rng.random_range(0.0..1.0);
                let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let v = d(&a, &p) - d(&a, &q) + margin;
                if v.abs() > 1e-3 && d(&a, &p) > 1e-3 && d(&a, &q) > 1e-3 {
                    break (a, p, q, margin);
                }
            };
            let loss = |a: &[f64], p: &[f64], q: &[f64]| {
                triplet_loss(&TripletBatch {
                    anchor: a.to_vec(),
                    positive: p.to_vec(),
                    negative: q.to_vec(),
                    margin,
                })
                .unwrap()
                .loss
            };
            let g = triplet_loss(&TripletBatch {
                anchor: a.clone(),
                positive: p.clone(),
                negative: q.clone(),
                margin,
            })
            .unwrap();
            let na = finite_diff_grad(|z| loss(z, &p, &q), &a, EPS);
            let np = finite_diff_grad(|z| loss(&a, z, &q), &p, EPS);
            let nq = finite_diff_grad(|z| loss(&a, &p, z), &q, EPS);
            let analytic: Vec<f64> = [g.anchor, g.positive, g.negative].concat();
            worst("triplet_loss", rel_error(&analytic, &[na, np, nq].concat()));

            let frames = rng.random_range(2..6);
            let logits = vec(rng, frames * frames, 2.0);
            let mut perm: Vec<usize> = (0..frames).collect();
            perm.shuffle(rng);
            let (_, g) = temporal_order_loss(&logits, &perm).unwrap();
            let n = finite_diff_grad(|z| temporal_order_loss(z, &perm).unwrap().0, &logits, EPS);
            worst("temporal_order_loss", rel_error(&g, &n));

            let (pred, target) = (rng.random_range(-0.5..1.5), rng.random_range(0.0..1.0));
            let (_, g) = fullness_mse(pred, target).unwrap();
            let n = finite_diff_grad(|z| fullness_mse(z[0], target).unwrap().0, &[pred], EPS);
            worst("fullness_mse", rel_error(&[g], &n));

            let parts = vec(rng, 4, 3.0);
            let w = LossWeights {
                ce: rng.random_range(0.0..2.0),
                tri: rng.random_range(0.0..2.0),
                temp: rng.random_range(0.0..2.0),
                full: rng.random_range(0.0..2.0),
            };
            let n = finite_diff_grad(|z| combined_repr_loss(z[0], z[1], z[2], z[3], &w).unwrap(), &parts, EPS);
            worst("combined_repr_loss", rel_error(&[w.ce, w.tri, w.temp, w.full], &n));

            let mean = vec(rng, 6, 1.0);
            let log_std = vec(rng, 6, 1.5);
            let action = vec(rng, 6, 1.0);
            let g = bc_nll(
                &GaussianActionHead {
                    mean: mean.clone(),
                    log_std: log_std.clone(),
                },
                &action,
            )
            .unwrap();
            let nll = |m: &[f64], s: &[f64]| {
                bc_nll(
                    &GaussianActionHead {
                        mean: m.to_vec(),
                        log_std: s.to_vec(),
                    },
                    &action,
                )
                .unwrap()
                .loss
            };
            let nm = finite_diff_grad(|z| nll(z, &log_std), &mean, EPS);
            let ns = finite_diff_grad(|z| nll(&mean, z), &log_std, EPS);
            worst("bc_nll", rel_error(&[g.mean, g.log_std].concat(), &[nm, ns].concat()));

            let dims = [rng.random_range(1..6), rng.random_range(1..8), rng.random_range(1..8), rng.random_range(1..4)];
            let (params, x, cache) = loop {
                let mut params = init_params(&dims, rng.random()).unwrap();
                let n = params.param_count();
                params.set_flat(&vec(rng, n, 1.0)).unwrap();
                let x = vec(rng, dims[0], 1.0);
                let (_, cache) = mlp_forward(&params, &x).unwrap();
                let near_kink = (0..2).any(|l| cache.pre_activations(l).iter().any(|z| z.abs() < 1e-3));
                if !near_kink {
                    break (params, x, cache);
                }
            };
            let up = vec(rng, dims[3], 1.0);
            let (pg, dx) = mlp_backward(&params, &cache, &up).unwrap();
            let scalar = |p: &imrl_core::numeric::MlpParams, x: &[f64]| {
                mlp_forward(p, x).unwrap().0.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
            };
            let flat = params.to_flat();
            let n = finite_diff_grad(
                |w| {
                    let mut p = params.clone();
                    p.set_flat(w).unwrap();
                    scalar(&p, &x)
                },
                &flat,
                EPS,
            );
            let nx = finite_diff_grad(|z| scalar(&params, z), &x, EPS);
            worst("mlp_backward", rel_error(&[pg.to_flat(), dx].concat(), &[n, nx].concat()));
        }
        out
    }
}
