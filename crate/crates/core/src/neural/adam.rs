//! Adam-family optimizer over [`MlpParams`]-shaped buffers.

use serde::{Deserialize, Serialize};

use super::{MlpGradients, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Use the rectified (warmup-corrected) variant instead of plain Adam.
    pub rectified: bool,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            rectified: false,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    m: MlpGradients,
    v: MlpGradients,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            config,
            m: MlpGradients::zeros_like(params),
            v: MlpGradients::zeros_like(params),
            step: 0,
        }
    }
}

/// One optimizer step in place. Rejects non-finite gradients. The step
/// counter increments by exactly 1.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut MlpParams,
    grads: &MlpGradients,
) -> Result<()> {
    if !params.shapes_match(grads) {
        return Err(Error::DimensionMismatch(
            "gradient shape does not match parameters".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients passed to optimizer".into()));
    }

    let c = state.config;
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - c.beta1.powf(t);
    let bc2 = 1.0 - c.beta2.powf(t);

    // Rectification factor for the variance-adaptive term; below the
    // threshold the update falls back to the bias-corrected first moment.
    let (rect_ok, rect) = if c.rectified {
        let rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
        let rho_t = rho_inf - 2.0 * t * c.beta2.powf(t) / bc2;
        if rho_t > 4.0 {
            let r = ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                .sqrt();
            (true, r)
        } else {
            (false, 1.0)
        }
    } else {
        (true, 1.0)
    };

    for (li, gl) in grads.layers.iter().enumerate() {
        let ml = &mut state.m.layers[li];
        let vl = &mut state.v.layers[li];
        let pl = &mut params.layers[li];
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            if rect_ok {
                let v_hat = *v / bc2;
                *p -= c.learning_rate * rect * m_hat / (v_hat.sqrt() + c.eps);
            } else {
                *p -= c.learning_rate * m_hat;
            }
        };
        for i in 0..gl.weights.len() {
            update(
                &mut pl.weights[i],
                &mut ml.weights[i],
                &mut vl.weights[i],
                gl.weights[i],
            );
        }
        for i in 0..gl.bias.len() {
            update(&mut pl.bias[i], &mut ml.bias[i], &mut vl.bias[i], gl.bias[i]);
        }
    }
    Ok(())
}
