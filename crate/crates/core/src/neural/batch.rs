//! Batched forward/backward over row-major `(batch, features)` matrices.
//!
//! The actor/critic updates run thousands of these per second, so the
//! buffers are allocated once in [`BatchScratch`] and reused. Results agree
//! with the single-vector path in [`super::mlp_forward`] /
//! [`super::mlp_gradients`] up to summation order.

use super::{
    activate, activate_deriv, activate_output, activate_output_deriv, MlpGradients, MlpParams,
    MlpSpec,
};
use crate::linalg::{axpy, dot, Matrix};

/// Reusable buffers for one network at a fixed batch size.
#[derive(Debug, Clone)]
pub struct BatchScratch {
    batch: usize,
    /// Activations per layer boundary: acts[0] is the input copy.
    acts: Vec<Matrix>,
    /// Pre-activations per layer.
    zs: Vec<Matrix>,
    /// Backprop deltas per layer.
    deltas: Vec<Matrix>,
}

impl BatchScratch {
    pub fn new(spec: &MlpSpec, batch: usize) -> Self {
        let mut acts = Vec::with_capacity(spec.layer_sizes.len());
        for &s in &spec.layer_sizes {
            acts.push(Matrix::zeros(batch, s));
        }
        let zs = spec.layer_sizes[1..]
            .iter()
            .map(|&s| Matrix::zeros(batch, s))
            .collect();
        let deltas = spec.layer_sizes[1..]
            .iter()
            .map(|&s| Matrix::zeros(batch, s))
            .collect();
        Self {
            batch,
            acts,
            zs,
            deltas,
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output after [`forward_batch`], shape `(batch, out_dim)`.
    pub fn output(&self) -> &Matrix {
        self.acts.last().unwrap()
    }

    /// Writable view of the input buffer, shape `(batch, in_dim)`.
    pub fn input_mut(&mut self) -> &mut Matrix {
        &mut self.acts[0]
    }
}

/// Forward pass for a whole batch; input must already be in
/// `scratch.input_mut()`. Output lands in `scratch.output()`.
pub fn forward_batch(params: &MlpParams, scratch: &mut BatchScratch) {
    let n_layers = params.layers.len();
    let b = scratch.batch;
    for (li, layer) in params.layers.iter().enumerate() {
        let last = li == n_layers - 1;
        let (head, tail) = scratch.acts.split_at_mut(li + 1);
        let prev = &head[li];
        let next = &mut tail[0];
        let z = &mut scratch.zs[li];
        for r in 0..b {
            let x = prev.row(r);
            let zr = z.row_mut(r);
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = dot(layer.weight_row(o), x) + layer.bias[o];
            }
        }
        for r in 0..b {
            let zr = z.row(r);
            let ar = next.row_mut(r);
            for (a, &zo) in ar.iter_mut().zip(zr.iter()) {
                *a = if last {
                    activate_output(params.spec.output_activation, zo)
                } else {
                    activate(params.spec.hidden_activation, zo)
                };
            }
        }
    }
}

/// Backward pass for the scalar sum over the batch of `upstream[r] . output[r]`.
///
/// Parameter gradients are *accumulated* into `grads` (summed over the
/// batch; scale `upstream` by `1/batch` for a mean). When `input_grad` is
/// given, the gradient with respect to the input lands there.
pub fn backward_batch(
    params: &MlpParams,
    scratch: &mut BatchScratch,
    upstream: &Matrix,
    grads: &mut MlpGradients,
    mut input_grad: Option<&mut Matrix>,
) {
    let n_layers = params.layers.len();
    let b = scratch.batch;
    assert_eq!(upstream.rows(), b);
    assert_eq!(upstream.cols(), params.spec.output_dim());

    // Output-layer delta.
    {
        let z = &scratch.zs[n_layers - 1];
        let d = &mut scratch.deltas[n_layers - 1];
        for r in 0..b {
            let dr = d.row_mut(r);
            let zr = z.row(r);
            let ur = upstream.row(r);
            for ((dv, &zv), &uv) in dr.iter_mut().zip(zr.iter()).zip(ur.iter()) {
                *dv = uv * activate_output_deriv(params.spec.output_activation, zv);
            }
        }
    }

    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        // dW[o] += sum_r delta[r,o] * act[r,:], db[o] += sum_r delta[r,o]
        {
            let delta = &scratch.deltas[li];
            let prev = &scratch.acts[li];
            let g = &mut grads.layers[li];
            for r in 0..b {
                let dr = delta.row(r);
                let xr = prev.row(r);
                for (o, &d) in dr.iter_enumerate() {
                    if d != 0.0 {
                        g.bias[o] += d;
                        let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        axpy(d, xr, row);
                    }
                }
            }
        }
        // Propagate delta to the previous layer or the input gradient.
        if li > 0 {
            let (lower, upper) = scratch.deltas.split_at_mut(li);
            let delta = &upper[0];
            let prev_delta = &mut lower[li - 1];
            prev_delta.fill(0.0);
            for r in 0..b {
                let dr = delta.row(r);
                let pr = prev_delta.row_mut(r);
                for (o, &d) in dr.iter_enumerate() {
                    if d != 0.0 {
                        axpy(d, layer.weight_row(o), pr);
                    }
                }
            }
            let z = &scratch.zs[li - 1];
            for r in 0..b {
                let pr = prev_delta.row_mut(r);
                let zr = z.row(r);
                for (pd, &zv) in pr.iter_mut().zip(zr.iter()) {
                    *pd *= activate_deriv(params.spec.hidden_activation, zv);
                }
            }
        } else if let Some(ig) = input_grad.as_deref_mut() {
            ig.fill(0.0);
            let delta = &scratch.deltas[0];
            for r in 0..b {
                let dr = delta.row(r);
                let gr = ig.row_mut(r);
                for (o, &d) in dr.iter_enumerate() {
                    if d != 0.0 {
                        axpy(d, layer.weight_row(o), gr);
                    }
                }
            }
        }
    }
}

// Tiny extension so the inner loops read naturally.
trait IterEnumerate {
    fn iter_enumerate(&self) -> std::iter::Enumerate<std::slice::Iter<'_, f64>>;
}

impl IterEnumerate for [f64] {
    fn iter_enumerate(&self) -> std::iter::Enumerate<std::slice::Iter<'_, f64>> {
        self.iter().enumerate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{mlp_forward, mlp_gradients, mlp_init, OutputActivation};

    #[test]
    fn batch_forward_matches_single_path() {
        let spec = MlpSpec::relu(vec![5, 16, 2], OutputActivation::Tanh).unwrap();
        let params = mlp_init(&spec, 5).unwrap();
        let batch = 7;
        let mut scratch = BatchScratch::new(&spec, batch);
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|r| (0..5).map(|i| (r * 5 + i) as f64 * 0.1 - 1.0).collect())
            .collect();
        for (r, input) in inputs.iter().enumerate() {
            scratch.input_mut().row_mut(r).copy_from_slice(input);
        }
        forward_batch(&params, &mut scratch);
        for (r, input) in inputs.iter().enumerate() {
            let single = mlp_forward(&params, input).unwrap();
            for (a, b) in scratch.output().row(r).iter().zip(single.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn batch_backward_matches_sum_of_single_gradients() {
        let spec = MlpSpec::relu(vec![4, 8, 3], OutputActivation::Identity).unwrap();
        let params = mlp_init(&spec, 9).unwrap();
        let batch = 5;
        let mut scratch = BatchScratch::new(&spec, batch);
        let mut upstream = Matrix::zeros(batch, 3);
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|r| (0..4).map(|i| ((r + i) as f64).sin()).collect())
            .collect();
        for r in 0..batch {
            scratch.input_mut().row_mut(r).copy_from_slice(&inputs[r]);
            for j in 0..3 {
                upstream.set(r, j, ((r * 3 + j) as f64).cos());
            }
        }
        forward_batch(&params, &mut scratch);
        let mut grads = MlpGradients::zeros_like(&params);
        let mut input_grad = Matrix::zeros(batch, 4);
        backward_batch(&params, &mut scratch, &upstream, &mut grads, Some(&mut input_grad));

        let mut expect = MlpGradients::zeros_like(&params);
        for r in 0..batch {
            let (g, din) = mlp_gradients(&params, &inputs[r], upstream.row(r)).unwrap();
            expect.add(&g);
            for (a, b) in input_grad.row(r).iter().zip(din.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for (a, e) in grads.layers.iter().zip(expect.layers.iter()) {
            for (x, y) in a.weights.iter().zip(e.weights.iter()) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
            for (x, y) in a.bias.iter().zip(e.bias.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
