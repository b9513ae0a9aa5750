use super::mlp::MlpParams;
use crate::error::{ImrlError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize], config: AdamConfig) -> Self {
        AdamState {
            config,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_mlp(params: &MlpParams, config: AdamConfig) -> Self {
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState::new(&lens, config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// Changes the learning rate used by later steps.
    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One bias-corrected Adam update over every tensor.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(ImrlError::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != self.first[i].len() {
                return Err(ImrlError::Shape(format!(
                    "tensor {i}: optimizer size {}, param {}, grad {}",
                    self.first[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_mlp(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        if params.layer_dims() != grads.layer_dims() {
            return Err(ImrlError::Shape("gradient architecture differs".into()));
        }
        let mut p = params.tensors_mut();
        self.step(&mut p, &grads.tensors())
    }
}

/// Functional form: returns updated parameters and optimizer state.
pub fn adam_step(
    params: &MlpParams,
    grads: &MlpParams,
    state: &AdamState,
) -> Result<(MlpParams, AdamState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    state.step_mlp(&mut params, grads)?;
    Ok((params, state))
}
