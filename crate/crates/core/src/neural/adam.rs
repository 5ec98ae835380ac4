use super::{NeuralError, TrainConfig};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        Self {
            m: vec![0.0; parameter_count],
            v: vec![0.0; parameter_count],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Moments accumulate in `f64`; the updated
/// parameters are rounded back to `f32` so the in-memory model is always
/// exactly what a save would write.
pub fn adam_step(
    params: &mut [f32],
    gradient: &[f64],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<(), NeuralError> {
    if params.len() != gradient.len() {
        return Err(NeuralError::ParameterCount {
            expected: params.len(),
            got: gradient.len(),
        });
    }
    let deltas = adam_deltas(gradient, state, config)?;
    for (p, d) in params.iter_mut().zip(deltas) {
        if d != 0.0 {
            *p = (*p as f64 + d) as f32;
        }
    }
    Ok(())
}

/// Advances the optimizer state and returns the additive parameter update.
pub(crate) fn adam_deltas(
    gradient: &[f64],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<Vec<f64>, NeuralError> {
    if state.m.len() != gradient.len() || state.v.len() != gradient.len() {
        return Err(NeuralError::ParameterCount {
            expected: state.m.len(),
            got: gradient.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    Ok(gradient
        .iter()
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
        .map(|((&g, m), v)| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            -config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon)
        })
        .collect())
}
