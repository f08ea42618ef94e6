use serde::{Deserialize, Serialize};

use super::{Gradients, MlpModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment accumulators over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(num_parameters: usize, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            m: vec![0.0; num_parameters],
            v: vec![0.0; num_parameters],
            step: 0,
        }
    }

    pub fn for_model(model: &MlpModel, config: AdamConfig) -> Self {
        Self::new(model.num_parameters(), config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update of a flat parameter vector.
    pub fn adam_step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
        }
        self.step += 1;
        self.update_chunk(0, params, grads);
        Ok(())
    }

    /// Applies one update to every layer of `model`.
    pub fn step_model(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        if model.num_parameters() != self.m.len() || grads.weights.len() != model.layers().len() {
            return Err(Error::Contract("optimizer state does not match the model".into()));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let mut offset = 0;
        for (layer, (gw, gb)) in model
            .layers_mut()
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            if layer.weights.dim() != gw.dim() || layer.biases.len() != gb.len() {
                return Err(Error::Contract("gradient shapes do not match the model".into()));
            }
            let w = layer.weights.as_slice_mut().expect("weights are contiguous");
            let g = gw.as_standard_layout();
            self.update_chunk(offset, w, g.as_slice().unwrap());
            offset += w.len();
            let b = layer.biases.as_slice_mut().expect("biases are contiguous");
            self.update_chunk(offset, b, gb.as_slice().unwrap());
            offset += b.len();
        }
        Ok(())
    }

    fn update_chunk(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
