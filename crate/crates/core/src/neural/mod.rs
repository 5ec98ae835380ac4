//! The overfit signed-distance network: a small fully connected MLP with ReLU
//! hidden layers and a TanH output, plus exact backpropagation and Adam.
//!
//! Parameters live in one flat vector, layer by layer, each layer storing its
//! row-major weight matrix (`out x in`) followed by its bias vector. The
//! stored copy is `f32` (that is what gets serialized); all arithmetic runs in
//! `f64` on a widened copy.

mod adam;
mod train;

pub use adam::{adam_step, AdamState};
pub use train::{train, EpochRecord, ProgressSink, TrainConfig, TrainOutcome, LABEL_LIMIT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::Vec3;

pub const INPUT_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("length mismatch: {predictions} predictions vs {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("parameter vector has {got} entries, architecture needs {expected}")]
    ParameterCount { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// `hidden_layers` fully connected layers of width `hidden_width`, ReLU
/// activated, followed by a single TanH output unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MlpArchitecture {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            hidden_layers: 8,
            hidden_width: 32,
        }
    }
}

impl std::fmt::Display for MlpArchitecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.hidden_layers, self.hidden_width)
    }
}

impl MlpArchitecture {
    pub fn new(hidden_layers: usize, hidden_width: usize) -> Result<Self, NeuralError> {
        if hidden_layers == 0 || hidden_width == 0 {
            return Err(NeuralError::InvalidArchitecture(format!(
                "{hidden_layers}x{hidden_width}: both dimensions must be at least 1"
            )));
        }
        Ok(Self {
            hidden_layers,
            hidden_width,
        })
    }

    /// `(fan_in, fan_out)` of every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let h = self.hidden_width;
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        shapes.push((INPUT_DIM, h));
        for _ in 1..self.hidden_layers {
            shapes.push((h, h));
        }
        shapes.push((h, 1));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// A network together with its flat `f32` parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    arch: MlpArchitecture,
    params: Vec<f32>,
}

impl MlpModel {
    pub fn from_parameters(arch: MlpArchitecture, params: Vec<f32>) -> Result<Self, NeuralError> {
        let expected = arch.parameter_count();
        if params.len() != expected {
            return Err(NeuralError::ParameterCount {
                expected,
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn zeros(arch: MlpArchitecture) -> Self {
        Self {
            params: vec![0.0; arch.parameter_count()],
            arch,
        }
    }

    pub fn architecture(&self) -> MlpArchitecture {
        self.arch
    }

    pub fn parameters(&self) -> &[f32] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn widened_parameters(&self) -> Vec<f64> {
        self.params.iter().map(|&p| p as f64).collect()
    }

    pub fn forward_point(&self, x: &Vec3) -> f64 {
        let wide = self.widened_parameters();
        let mut scratch = Scratch::new(&self.arch);
        forward_with(&self.arch, &wide, x, &mut scratch)
    }

    /// Evaluates every point independently; the result for a point never
    /// depends on the rest of the batch.
    pub fn forward(&self, points: &[Vec3]) -> Vec<f64> {
        let wide = self.widened_parameters();
        let mut scratch = Scratch::new(&self.arch);
        points
            .iter()
            .map(|p| forward_with(&self.arch, &wide, p, &mut scratch))
            .collect()
    }

    /// Reverse-mode gradient of the mean L1 loss over the batch.
    pub fn backward(&self, points: &[Vec3], targets: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let wide = self.widened_parameters();
        let mut grad = vec![0.0; wide.len()];
        loss_and_gradient(&self.arch, &wide, points, targets, &mut grad)?;
        Ok(grad)
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(arch: MlpArchitecture, seed: u64) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(arch.parameter_count());
    for (fan_in, fan_out) in arch.layer_shapes() {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(rng.random_range(-bound..=bound) as f32);
        }
        params.extend(std::iter::repeat_n(0.0f32, fan_out));
    }
    MlpModel { arch, params }
}

/// Per-layer activation buffers reused across points.
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Scratch {
    pub fn new(arch: &MlpArchitecture) -> Self {
        let h = arch.hidden_width;
        let mut acts = vec![vec![0.0; INPUT_DIM]];
        acts.extend((0..arch.hidden_layers).map(|_| vec![0.0; h]));
        Self {
            acts,
            delta: vec![0.0; h.max(INPUT_DIM)],
            delta_next: vec![0.0; h.max(INPUT_DIM)],
        }
    }
}

#[inline]
fn dense(weights: &[f64], bias: &[f64], input: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * n_in..(j + 1) * n_in];
        let mut acc = bias[j];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        *o = acc;
    }
}

/// Forward pass for one point on a widened parameter vector. Leaves the
/// hidden activations in `scratch` and returns the TanH output.
pub fn forward_with(arch: &MlpArchitecture, params: &[f64], x: &Vec3, scratch: &mut Scratch) -> f64 {
    debug_assert_eq!(params.len(), arch.parameter_count());
    scratch.acts[0].copy_from_slice(x.as_slice());
    let mut offset = 0;
    for (layer, (fan_in, fan_out)) in arch.layer_shapes().into_iter().enumerate() {
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        if layer < arch.hidden_layers {
            let (head, tail) = scratch.acts.split_at_mut(layer + 1);
            let out = &mut tail[0];
            dense(w, b, &head[layer], out);
            for v in out.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        } else {
            let mut z = [0.0];
            dense(w, b, &scratch.acts[layer], &mut z);
            return z[0].tanh();
        }
    }
    unreachable!("architecture always has an output layer")
}

pub fn loss_l1(predictions: &[f64], targets: &[f64]) -> Result<f64, NeuralError> {
    if predictions.len() != targets.len() {
        return Err(NeuralError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

#[inline]
fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean L1 loss over the batch, writing its exact gradient into `grad`.
///
/// Subgradient conventions: `d|u|/du = 0` at `u = 0` and `ReLU'(0) = 0`.
pub fn loss_and_gradient(
    arch: &MlpArchitecture,
    params: &[f64],
    points: &[Vec3],
    targets: &[f64],
    grad: &mut [f64],
) -> Result<f64, NeuralError> {
    if points.len() != targets.len() {
        return Err(NeuralError::LengthMismatch {
            predictions: points.len(),
            targets: targets.len(),
        });
    }
    if points.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let shapes = arch.layer_shapes();
    let mut offsets = Vec::with_capacity(shapes.len());
    let mut off = 0;
    for (i, o) in &shapes {
        offsets.push(off);
        off += i * o + o;
    }
    let mut scratch = Scratch::new(arch);
    let inv_n = 1.0 / points.len() as f64;
    let mut loss = 0.0;

    for (x, &target) in points.iter().zip(targets) {
        let y = forward_with(arch, params, x, &mut scratch);
        let r = y - target;
        loss += r.abs();
        let dl_dy = sign_or_zero(r) * inv_n;
        if dl_dy == 0.0 {
            continue;
        }
        // through tanh
        let dz = dl_dy * (1.0 - y * y);

        let last = shapes.len() - 1;
        let (fan_in, _) = shapes[last];
        let w_off = offsets[last];
        let h = &scratch.acts[last];
        for i in 0..fan_in {
            grad[w_off + i] += dz * h[i];
        }
        grad[w_off + fan_in] += dz;
        let delta = &mut scratch.delta[..fan_in];
        for i in 0..fan_in {
            // mask by ReLU derivative of the layer that produced h
            delta[i] = if h[i] > 0.0 { params[w_off + i] * dz } else { 0.0 };
        }

        for layer in (0..last).rev() {
            let (fan_in, fan_out) = shapes[layer];
            let w_off = offsets[layer];
            let b_off = w_off + fan_in * fan_out;
            let input = &scratch.acts[layer];
            let delta = &scratch.delta[..fan_out];
            for j in 0..fan_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
                grad[b_off + j] += d;
            }
            if layer == 0 {
                break;
            }
            let next = &mut scratch.delta_next[..fan_in];
            next.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..fan_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &params[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += w * d;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.delta_next);
        }
    }
    Ok(loss * inv_n)
}
