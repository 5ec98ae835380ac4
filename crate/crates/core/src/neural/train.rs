use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::{loss_and_gradient, MlpModel, NeuralError};
use crate::geom::Vec3;
use crate::sampling::LabeledSample;

/// TanH cannot reach ±1, so targets are pulled just inside the open range.
pub const LABEL_LIMIT: f64 = 1.0 - 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without sufficient relative improvement before stopping.
    pub patience: usize,
    pub min_relative_improvement: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_epochs: 100,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            min_relative_improvement: 1e-3,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: &str| Err(NeuralError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Lowest epoch loss seen so far, this epoch included.
    pub best_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest mean loss.
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn epochs_ran(&self) -> usize {
        self.history.len()
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.best_loss)
    }
}

/// Receives one record per finished epoch.
pub trait ProgressSink {
    fn epoch_done(&mut self, record: &EpochRecord);
}

impl<F: FnMut(&EpochRecord)> ProgressSink for F {
    fn epoch_done(&mut self, record: &EpochRecord) {
        self(record)
    }
}

/// Mini-batch Adam on the mean L1 loss with seeded shuffling and early
/// stopping on the running best epoch loss.
pub fn train(
    model: MlpModel,
    training_set: &[LabeledSample],
    config: &TrainConfig,
    progress: &mut dyn ProgressSink,
) -> Result<TrainOutcome, NeuralError> {
    config.validate()?;
    if training_set.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let arch = model.architecture();
    let positions: Vec<Vec3> = training_set.iter().map(|s| s.position).collect();
    let targets: Vec<f64> = training_set
        .iter()
        .map(|s| s.sdf.clamp(-LABEL_LIMIT, LABEL_LIMIT))
        .collect();

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..training_set.len()).collect();
    let mut state = AdamState::new(arch.parameter_count());
    let mut current = model.clone();
    let mut best = model;
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;

    let mut grad = vec![0.0; arch.parameter_count()];
    let mut wide = current.widened_parameters();
    let mut batch_pts = Vec::with_capacity(config.batch_size);
    let mut batch_tgt = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_pts.clear();
            batch_tgt.clear();
            batch_pts.extend(chunk.iter().map(|&i| positions[i]));
            batch_tgt.extend(chunk.iter().map(|&i| targets[i]));
            let loss = loss_and_gradient(&arch, &wide, &batch_pts, &batch_tgt, &mut grad)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NeuralError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(current.parameters_mut(), &grad, &mut state, config)?;
            for (w, p) in wide.iter_mut().zip(current.parameters()) {
                *w = *p as f64;
            }
        }
        let epoch_loss = loss_sum / training_set.len() as f64;

        if epoch_loss < best_loss * (1.0 - config.min_relative_improvement) {
            stale = 0;
        } else {
            stale += 1;
        }
        if epoch_loss < best_loss {
            best_loss = epoch_loss;
            best = current.clone();
            best_epoch = Some(epoch);
        }
        let record = EpochRecord {
            epoch,
            loss: epoch_loss,
            best_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress.epoch_done(&record);
        history.push(record);
        if stale >= config.patience {
            stopped_early = epoch + 1 < config.max_epochs;
            break;
        }
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_model, MlpArchitecture};

    fn toy_set() -> Vec<LabeledSample> {
        (0..64)
            .map(|i| {
                let t = i as f64 / 64.0;
                let p = Vec3::new(t - 0.5, (3.0 * t).sin() * 0.5, 0.2);
                LabeledSample::new(p, p.norm() - 0.3, 1.0)
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let m = init_model(MlpArchitecture::new(2, 8).unwrap(), 1);
        let cfg = TrainConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let out = train(m.clone(), &toy_set(), &cfg, &mut |_: &EpochRecord| {}).unwrap();
        assert_eq!(out.model, m);
        assert!(out.history.is_empty());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let m = init_model(MlpArchitecture::new(1, 4).unwrap(), 1);
        let err = train(m, &[], &TrainConfig::default(), &mut |_: &EpochRecord| {}).unwrap_err();
        assert_eq!(err, NeuralError::EmptyTrainingSet);
    }

    #[test]
    fn deterministic_and_best_so_far_monotone() {
        let arch = MlpArchitecture::new(2, 8).unwrap();
        let cfg = TrainConfig {
            max_epochs: 30,
            batch_size: 16,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let run = || train(init_model(arch, 5), &toy_set(), &cfg, &mut |_: &EpochRecord| {}).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.model, b.model);
        assert!(a.history.windows(2).all(|w| w[1].best_loss <= w[0].best_loss));
        assert!(a.history.last().unwrap().best_loss < a.history[0].loss);
    }

    #[test]
    fn non_finite_targets_abort() {
        let m = init_model(MlpArchitecture::new(1, 4).unwrap(), 1);
        let set = vec![LabeledSample::new(Vec3::new(f64::NAN, 0.0, 0.0), 0.1, 1.0)];
        let err = train(m, &set, &TrainConfig::default(), &mut |_: &EpochRecord| {}).unwrap_err();
        assert_eq!(err, NeuralError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
}
