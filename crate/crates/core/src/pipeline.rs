//! Mesh to neural implicit conversion: normalize, sign, sample, train, report.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::distance_field::{MeshSdf, DEFAULT_ACCURACY_BETA};
use crate::eval::{surface_error, EvalError, EvalReport, DEFAULT_SURFACE_SAMPLES};
use crate::format::{file_size, FormatError, NeuralField, NeuralImplicit};
use crate::mesh::{load_mesh, normalize_to_unit_sphere, Mesh, MeshError, DEFAULT_PADDING};
use crate::neural::{init_model, train, MlpArchitecture, NeuralError, ProgressSink, TrainConfig, TrainOutcome};
use crate::sampling::{build_training_set, SamplingConfig, SamplingError, DESK_SCALE};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertConfig {
    pub architecture: MlpArchitecture,
    pub padding: f64,
    pub accuracy_beta: f64,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    pub surface_samples: usize,
    /// Seed of the surface samples used for the reported error.
    pub eval_seed: u64,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        Self::scaled(DESK_SCALE, 42)
    }
}

impl ConvertConfig {
    /// Defaults with sample counts multiplied by `scale` and every seed set
    /// to `seed`.
    pub fn scaled(scale: f64, seed: u64) -> Self {
        Self {
            architecture: MlpArchitecture::default(),
            padding: DEFAULT_PADDING,
            accuracy_beta: DEFAULT_ACCURACY_BETA,
            sampling: SamplingConfig {
                seed,
                ..SamplingConfig::scaled(scale)
            },
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            surface_samples: ((DEFAULT_SURFACE_SAMPLES as f64 * scale).round() as usize).max(1),
            eval_seed: seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub implicit: NeuralImplicit,
    /// The mesh in the network's normalized frame.
    pub normalized: Mesh,
    pub training: TrainOutcome,
    pub report: EvalReport,
}

pub fn convert_mesh(mesh: &Mesh, config: &ConvertConfig, progress: &mut dyn ProgressSink) -> Result<Conversion, ConvertError> {
    let start = Instant::now();
    let (normalized, transform) = normalize_to_unit_sphere(mesh, config.padding)?;
    let oracle = MeshSdf::with_accuracy(&normalized, config.accuracy_beta);
    let samples = build_training_set(&oracle, Some(&normalized), &config.sampling)?;
    let model = init_model(config.architecture, config.train.seed);
    let training = train(model, &samples, &config.train, progress)?;
    let implicit = NeuralImplicit::new(training.model.clone(), &transform);
    let err = surface_error(&NeuralField::new(&training.model), &normalized, config.surface_samples, config.eval_seed)?;
    let report = EvalReport {
        surface_error: err,
        training_loss: training.best_loss().unwrap_or(f64::NAN),
        surface_sample_count: config.surface_samples,
        epochs_ran: training.epochs_ran(),
        file_bytes: file_size(&config.architecture),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Conversion {
        implicit,
        normalized,
        training,
        report,
    })
}

/// Loads `input`, converts it and writes the `.ni` file to `output`.
pub fn convert_file(
    input: &Path,
    output: &Path,
    config: &ConvertConfig,
    progress: &mut dyn ProgressSink,
) -> Result<Conversion, ConvertError> {
    let mesh = load_mesh(input, None)?;
    let conversion = convert_mesh(&mesh, config, progress)?;
    conversion.implicit.save(output)?;
    Ok(conversion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use crate::neural::EpochRecord;

    #[test]
    fn small_conversion_runs() {
        let mut cfg = ConvertConfig::scaled(0.001, 7);
        cfg.architecture = MlpArchitecture::new(2, 8).unwrap();
        cfg.train.max_epochs = 3;
        let mut epochs = 0;
        let c = convert_mesh(&shapes::icosphere(1, 2.0), &cfg, &mut |_: &EpochRecord| epochs += 1).unwrap();
        assert_eq!(epochs, 3);
        assert_eq!(c.report.epochs_ran, 3);
        assert_eq!(c.report.surface_sample_count, 100);
        assert_eq!(c.report.file_bytes, c.implicit.to_bytes().len());
        assert!((c.implicit.scale() - 0.45).abs() < 1e-6);
    }
}
