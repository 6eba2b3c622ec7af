//! Adam with L2 weight decay folded into the gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::LayerParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments for one layer's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_scalars: usize) -> Self {
        AdamState {
            m: vec![0.0; num_scalars],
            v: vec![0.0; num_scalars],
            t: 0,
        }
    }

    pub fn for_params(p: &LayerParams) -> Self {
        Self::new(p.num_scalars())
    }

    pub fn byte_size(&self) -> usize {
        (self.m.len() + self.v.len()) * std::mem::size_of::<f64>()
    }
}

/// One Adam update on flat parameter and gradient slices.
pub fn adam_step_flat(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dims("adam_step", params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for k in 0..params.len() {
        let g = grads[k] + weight_decay * params[k];
        state.m[k] = BETA1 * state.m[k] + (1.0 - BETA1) * g;
        state.v[k] = BETA2 * state.v[k] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

/// One Adam update of a layer.
pub fn adam_step(
    params: &mut LayerParams,
    grads: &LayerParams,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.architecture() != grads.architecture() {
        return Err(Error::InvalidArgument("gradient architecture differs from parameters".into()));
    }
    let mut flat = params.to_flat();
    adam_step_flat(&mut flat, &grads.to_flat(), state, lr, weight_decay)?;
    params.set_flat(&flat)
}
