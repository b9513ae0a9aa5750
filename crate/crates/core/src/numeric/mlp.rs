use rand::Rng as _;

use super::array::{gemm, DenseArray};
use super::debug_check_finite;
use crate::error::{ImrlError, Result};
use crate::seed;

/// Parameters of a fully connected network: ReLU between layers, identity
/// on the output. Weight `i` has shape `[dims[i+1], dims[i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layer_dims: Vec<usize>,
    weights: Vec<DenseArray>,
    biases: Vec<DenseArray>,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    layer_dims: Vec<usize>,
    batch: usize,
    /// Input to every layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of every layer.
    pre: Vec<Vec<f64>>,
}

pub type BatchCache = ForwardCache;

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Pre-activations of layer `layer`, `batch × dims[layer+1]`.
    pub fn pre_activations(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(ImrlError::InvalidArchitecture(format!(
            "need at least 2 layer dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(ImrlError::InvalidArchitecture(format!(
            "layer dims must be >= 1, got {dims:?}"
        )));
    }
    Ok(())
}

/// He-style uniform initialisation: weights ~ U(-√(6/fan_in), √(6/fan_in)),
/// biases zero.
pub fn init_params(layer_dims: &[usize], seed: u64) -> Result<MlpParams> {
    check_dims(layer_dims)?;
    let mut rng = seed::rng(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        weights.push(DenseArray::from_vec(&[fan_out, fan_in], data)?);
        biases.push(DenseArray::zeros(&[fan_out]));
    }
    Ok(MlpParams {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

impl MlpParams {
    pub fn from_parts(
        layer_dims: &[usize],
        weights: Vec<DenseArray>,
        biases: Vec<DenseArray>,
    ) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(ImrlError::Shape(format!(
                "{layers} layers need {layers} weights and biases, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (i, pair) in layer_dims.windows(2).enumerate() {
            if weights[i].shape() != [pair[1], pair[0]] || biases[i].shape() != [pair[1]] {
                return Err(ImrlError::Shape(format!(
                    "layer {i}: expected weight [{}, {}] and bias [{}], got {:?} and {:?}",
                    pair[1],
                    pair[0],
                    pair[1],
                    weights[i].shape(),
                    biases[i].shape()
                )));
            }
        }
        Ok(MlpParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two dims")
    }

    pub fn weight(&self, layer: usize) -> &DenseArray {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &DenseArray {
        &self.biases[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut DenseArray {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut DenseArray {
        &mut self.biases[layer]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(DenseArray::len).sum::<usize>()
            + self.biases.iter().map(DenseArray::len).sum::<usize>()
    }

    /// Same architecture, all parameters zero. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(DenseArray::zeros_like).collect(),
            biases: self.biases.iter().map(DenseArray::zeros_like).collect(),
        }
    }

    /// Parameter tensors in layer order: w0, b0, w1, b1, ...
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.data(), b.data()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.data_mut(), b.data_mut()])
            .collect()
    }

    /// All parameters flattened in `tensors()` order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(ImrlError::Shape(format!(
                "flat vector has {} values, network has {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) -> Result<()> {
        if self.layer_dims != other.layer_dims {
            return Err(ImrlError::Shape(format!(
                "cannot add {:?} to {:?}",
                other.layer_dims, self.layer_dims
            )));
        }
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
        Ok(())
    }
}

/// Single-sample forward pass.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    mlp_forward_batch(params, x, 1)
}

/// Forward pass over `batch` row-major samples.
pub fn mlp_forward_batch(
    params: &MlpParams,
    x: &[f64],
    batch: usize,
) -> Result<(Vec<f64>, ForwardCache)> {
    let in_dim = params.input_dim();
    if x.len() != batch * in_dim {
        return Err(ImrlError::Shape(format!(
            "input has {} values, expected {batch} × {in_dim}",
            x.len()
        )));
    }
    let layers = params.num_layers();
    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut current = x.to_vec();
    for layer in 0..layers {
        let (fan_in, fan_out) = (params.layer_dims[layer], params.layer_dims[layer + 1]);
        let bias = params.biases[layer].data();
        let mut z = Vec::with_capacity(batch * fan_out);
        for _ in 0..batch {
            z.extend_from_slice(bias);
        }
        gemm(
            batch,
            fan_in,
            fan_out,
            &current,
            false,
            params.weights[layer].data(),
            true,
            1.0,
            &mut z,
        );
        let next = if layer + 1 < layers {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        inputs.push(current);
        pre.push(z);
        current = next;
    }
    debug_check_finite(&current, "mlp_forward");
    Ok((
        current,
        ForwardCache {
            layer_dims: params.layer_dims.clone(),
            batch,
            inputs,
            pre,
        },
    ))
}

/// Single-sample backward pass. Returns parameter gradients and the
/// gradient with respect to the input.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    dloss_dy: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    mlp_backward_batch(params, cache, dloss_dy)
}

/// Batched backward pass; parameter gradients are summed over the batch.
pub fn mlp_backward_batch(
    params: &MlpParams,
    cache: &ForwardCache,
    dloss_dy: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    let mut grads = params.zeros_like();
    let dx = mlp_backward_accumulate(params, cache, dloss_dy, &mut grads, true)?
        .expect("input gradient requested");
    Ok((grads, dx))
}

/// Backward pass that adds parameter gradients into `grads`. The input
/// gradient is only computed when `want_input_grad` is set.
pub fn mlp_backward_accumulate(
    params: &MlpParams,
    cache: &ForwardCache,
    dloss_dy: &[f64],
    grads: &mut MlpParams,
    want_input_grad: bool,
) -> Result<Option<Vec<f64>>> {
    if cache.layer_dims != params.layer_dims {
        return Err(ImrlError::Shape(format!(
            "cache was produced by a {:?} network, params are {:?}",
            cache.layer_dims, params.layer_dims
        )));
    }
    if grads.layer_dims != params.layer_dims {
        return Err(ImrlError::Shape("gradient buffer architecture differs".into()));
    }
    let batch = cache.batch;
    let out_dim = params.output_dim();
    if dloss_dy.len() != batch * out_dim {
        return Err(ImrlError::Shape(format!(
            "upstream gradient has {} values, expected {batch} × {out_dim}",
            dloss_dy.len()
        )));
    }
    let layers = params.num_layers();
    let mut delta = dloss_dy.to_vec();
    for layer in (0..layers).rev() {
        let (fan_in, fan_out) = (params.layer_dims[layer], params.layer_dims[layer + 1]);
        if layer + 1 < layers {
            for (d, z) in delta.iter_mut().zip(&cache.pre[layer]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        // dW += δᵀ · input
        gemm(
            fan_out,
            batch,
            fan_in,
            &delta,
            true,
            &cache.inputs[layer],
            false,
            1.0,
            grads.weights[layer].data_mut(),
        );
        let db = grads.biases[layer].data_mut();
        for row in delta.chunks_exact(fan_out) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        if layer == 0 && !want_input_grad {
            return Ok(None);
        }
        let mut next = vec![0.0; batch * fan_in];
        gemm(
            batch,
            fan_out,
            fan_in,
            &delta,
            false,
            params.weights[layer].data(),
            false,
            0.0,
            &mut next,
        );
        delta = next;
    }
    debug_check_finite(&delta, "mlp_backward");
    Ok(Some(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_diff_grad;

    #[test]
    fn parameter_count_matches_layer_sum() {
        let p = init_params(&[2, 3, 1], 0).unwrap();
        assert_eq!(p.param_count(), 13);
        assert_eq!(p.to_flat().len(), 13);
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&[4, 5, 3], 11).unwrap();
        let b = init_params(&[4, 5, 3], 11).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
        let c = init_params(&[4, 5, 3], 12).unwrap();
        assert_ne!(a.to_flat(), c.to_flat());
    }

    #[test]
    fn too_few_dims_is_rejected() {
        assert!(matches!(
            init_params(&[5], 0),
            Err(ImrlError::InvalidArchitecture(_))
        ));
        assert!(matches!(
            init_params(&[5, 0, 2], 0),
            Err(ImrlError::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut p = init_params(&[3, 2], 0).unwrap();
        p.weight_mut(0).data_mut().fill(0.0);
        p.bias_mut(0).data_mut().copy_from_slice(&[0.5, -2.0]);
        let (y, _) = mlp_forward(&p, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.5, -2.0]);
    }

    #[test]
    fn relu_zeroes_negative_hidden_preactivation() {
        // hidden = relu(-1) = 0, output = 3·hidden + 0.25
        let w0 = DenseArray::from_vec(&[1, 1], vec![1.0]).unwrap();
        let b0 = DenseArray::from_vec(&[1], vec![-2.0]).unwrap();
        let w1 = DenseArray::from_vec(&[1, 1], vec![3.0]).unwrap();
        let b1 = DenseArray::from_vec(&[1], vec![0.25]).unwrap();
        let p = MlpParams::from_parts(&[1, 1, 1], vec![w0, w1], vec![b0, b1]).unwrap();
        let (y, cache) = mlp_forward(&p, &[1.0]).unwrap();
        assert_eq!(cache.pre_activations(0), &[-1.0]);
        assert_eq!(y, vec![0.25]);
    }

    #[test]
    fn input_shape_is_checked() {
        let p = init_params(&[3, 2], 0).unwrap();
        assert!(matches!(mlp_forward(&p, &[1.0]), Err(ImrlError::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = init_params(&[4, 6, 3], 5).unwrap();
        let (_, cache) = mlp_forward(&p, &[0.1, -0.2, 0.3, 0.4]).unwrap();
        let (g, dx) = mlp_backward(&p, &cache, &[0.0; 3]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_passes_unit_gradient() {
        let n = 4;
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let w = DenseArray::from_vec(&[n, n], eye).unwrap();
        let p = MlpParams::from_parts(&[n, n], vec![w], vec![DenseArray::zeros(&[n])]).unwrap();
        let x = [0.3, -1.0, 2.0, 0.0];
        let (y, cache) = mlp_forward(&p, &x).unwrap();
        assert_eq!(y, x.to_vec());
        // loss = Σ y
        let (_, dx) = mlp_backward(&p, &cache, &[1.0; 4]).unwrap();
        assert_eq!(dx, vec![1.0; 4]);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let p = init_params(&[4, 6, 3], 5).unwrap();
        let q = init_params(&[4, 5, 3], 5).unwrap();
        let (_, cache) = mlp_forward(&q, &[0.0; 4]).unwrap();
        assert!(matches!(
            mlp_backward(&p, &cache, &[0.0; 3]),
            Err(ImrlError::Shape(_))
        ));
    }

    #[test]
    fn batch_gradients_are_sums_of_single_gradients() {
        let p = init_params(&[3, 4, 2], 9).unwrap();
        let xs = [0.5, -0.1, 0.2, -0.7, 0.9, 0.3];
        let dys = [1.0, -0.5, 0.25, 2.0];
        let (_, cache) = mlp_forward_batch(&p, &xs, 2).unwrap();
        let (g, dx) = mlp_backward_batch(&p, &cache, &dys).unwrap();
        let mut sum = p.zeros_like();
        let mut dx_single = Vec::new();
        for i in 0..2 {
            let (_, c) = mlp_forward(&p, &xs[i * 3..i * 3 + 3]).unwrap();
            let (gi, dxi) = mlp_backward(&p, &c, &dys[i * 2..i * 2 + 2]).unwrap();
            sum.add_scaled(&gi, 1.0).unwrap();
            dx_single.extend(dxi);
        }
        for (a, b) in g.to_flat().iter().zip(sum.to_flat()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in dx.iter().zip(&dx_single) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let p = init_params(&[5, 7, 3], 21).unwrap();
        let x = [0.3, -0.2, 0.8, 0.1, -0.5];
        let weights = [0.7, -1.1, 0.4];
        let loss = |params: &MlpParams, x: &[f64]| -> f64 {
            let (y, _) = mlp_forward(params, x).unwrap();
            y.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = mlp_forward(&p, &x).unwrap();
        let (g, dx) = mlp_backward(&p, &cache, &weights).unwrap();
        let flat = p.to_flat();
        let numeric = finite_diff_grad(
            |w| {
                let mut q = p.clone();
                q.set_flat(w).unwrap();
                loss(&q, &x)
            },
            &flat,
            1e-5,
        );
        for (a, b) in g.to_flat().iter().zip(&numeric) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let numeric_x = finite_diff_grad(|x| loss(&p, x), &x, 1e-5);
        for (a, b) in dx.iter().zip(&numeric_x) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }
}
