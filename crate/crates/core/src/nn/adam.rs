use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    /// GAN-style defaults: β1 = 0.5, β2 = 0.999, ε = 1e-8.
    pub fn gan(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub moments: IndexMap<String, Moments>,
}

impl AdamState {
    /// Zeroed moments mirroring every tensor in `params`.
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let moments = params
            .iter()
            .map(|(name, t)| {
                (
                    name.to_string(),
                    Moments {
                        m: vec![0.0; t.len()],
                        v: vec![0.0; t.len()],
                    },
                )
            })
            .collect();
        AdamState {
            config,
            t: 0,
            moments,
        }
    }
}

/// One bias-corrected Adam update. Every parameter must carry a gradient;
/// gradients are cleared afterwards.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    for (name, t) in params.iter() {
        if t.grad().is_none() {
            return Err(Error::Usage(format!(
                "parameter `{name}` of `{}` has no gradient",
                params.label()
            )));
        }
        match state.moments.get(name) {
            Some(mo) if mo.m.len() == t.len() => {}
            _ => {
                return Err(Error::Usage(format!(
                    "optimizer state does not mirror parameter `{name}`"
                )))
            }
        }
    }
    state.t += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (name, t) in params.iter_mut() {
        let g = t.take_grad().expect("checked above");
        let mo = state.moments.get_mut(name).expect("checked above");
        for (((p, gi), m), v) in t
            .data_mut()
            .iter_mut()
            .zip(&g)
            .zip(mo.m.iter_mut())
            .zip(mo.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
