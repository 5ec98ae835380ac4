//! Quality metrics for fitted fields and the neural-versus-grid comparison.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::distance_field::{build_sdf_grid, DistanceError, SdfGrid};
use crate::field::DistanceField;
use crate::format::{file_size, NeuralField};
use crate::geom::Vec3;
use crate::mesh::{sample_surface, Mesh};
use crate::neural::{init_model, train, EpochRecord, MlpArchitecture, MlpModel, NeuralError, TrainConfig};
use crate::sampling::LabeledSample;

pub const DEFAULT_SURFACE_SAMPLES: usize = 100_000;
pub const BASELINE_GRID_RESOLUTION: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("architecture ladder is empty")]
    EmptyLadder,
    #[error("architecture ladder must be sorted by parameter count")]
    UnsortedLadder,
    #[error("surface sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Grid(#[from] DistanceError),
}

/// Mean in a fixed pairwise order, independent of thread count. Merging two
/// halves as `a + (b - a) * nb / n` keeps the mean of equal values exact.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    match values.len() {
        0 => f64::NAN,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            let (a, b) = (pairwise_mean(lo), pairwise_mean(hi));
            a + (b - a) * (hi.len() as f64 / n as f64)
        }
    }
}

/// Mean of the absolute values.
pub fn mean_abs(values: &[f64]) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    pairwise_mean(&abs)
}

/// Evaluates `field` at every point; chunks run in parallel but results come
/// back in input order.
pub fn evaluate_points(field: &dyn DistanceField, points: &[Vec3]) -> Vec<f64> {
    points
        .par_chunks(4096)
        .map(|chunk| field.distance_batch(chunk))
        .collect::<Vec<_>>()
        .concat()
}

/// Mean absolute field value at `count` area-uniform samples of `mesh`.
/// The mesh must already live in the field's coordinate frame.
pub fn surface_error(field: &dyn DistanceField, mesh: &Mesh, count: usize, seed: u64) -> Result<f64, EvalError> {
    if count == 0 {
        return Err(EvalError::NoSamples);
    }
    let points = sample_surface(mesh, count, seed);
    Ok(mean_abs(&evaluate_points(field, &points)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub surface_error: f64,
    pub training_loss: f64,
    pub surface_sample_count: usize,
    pub epochs_ran: usize,
    pub file_bytes: usize,
    pub wall_seconds: f64,
}

impl EvalReport {
    pub const TABLE_HEADER: &'static str = "surface_error\ttraining_loss\tsurface_samples\tepochs\tbytes\tseconds";

    pub fn table_row(&self) -> String {
        format!(
            "{:.6}\t{:.6}\t{}\t{}\t{}\t{:.2}",
            self.surface_error, self.training_loss, self.surface_sample_count, self.epochs_ran, self.file_bytes, self.wall_seconds
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "surface_error={:.6} training_loss={:.6} surface_samples={} epochs={} bytes={} seconds={:.2}",
            self.surface_error, self.training_loss, self.surface_sample_count, self.epochs_ran, self.file_bytes, self.wall_seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub neural_error: f64,
    pub grid_error: f64,
    pub neural_bytes: usize,
    pub grid_bytes: usize,
    pub neural_payload_bytes: usize,
    pub grid_payload_bytes: usize,
}

impl Comparison {
    pub fn neural_wins(&self) -> bool {
        self.neural_error < self.grid_error
    }
}

/// Surface error of a network against a trilinear grid of the same oracle,
/// both measured on the same surface samples.
pub fn compare_representations(
    mesh: &Mesh,
    oracle: &dyn DistanceField,
    neural: &MlpModel,
    grid_resolution: usize,
    count: usize,
    seed: u64,
) -> Result<(Comparison, SdfGrid), EvalError> {
    if count == 0 {
        return Err(EvalError::NoSamples);
    }
    let grid = build_sdf_grid(oracle, grid_resolution)?;
    let points = sample_surface(mesh, count, seed);
    let neural_error = mean_abs(&evaluate_points(&NeuralField::new(neural), &points));
    let grid_error = mean_abs(&evaluate_points(&grid, &points));
    let arch = neural.architecture();
    let comparison = Comparison {
        neural_error,
        grid_error,
        neural_bytes: file_size(&arch),
        grid_bytes: grid.byte_size(),
        neural_payload_bytes: 4 * arch.parameter_count(),
        grid_payload_bytes: grid.payload_bytes(),
    };
    Ok((comparison, grid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscalationAttempt {
    pub architecture: MlpArchitecture,
    pub surface_error: f64,
    pub training_loss: f64,
    pub epochs_ran: usize,
}

#[derive(Debug, Clone)]
pub struct EscalationOutcome {
    pub model: MlpModel,
    pub report: EvalReport,
    /// False when no architecture reached the target; `model` is then the
    /// best one found.
    pub met: bool,
    pub attempts: Vec<EscalationAttempt>,
}

/// Trains each architecture of `ladder` in turn on `training_set` until one
/// reaches `target_error` on the mesh surface.
pub fn error_driven_escalation(
    mesh: &Mesh,
    training_set: &[LabeledSample],
    target_error: f64,
    ladder: &[MlpArchitecture],
    config: &TrainConfig,
    surface_count: usize,
    seed: u64,
) -> Result<EscalationOutcome, EvalError> {
    if ladder.is_empty() {
        return Err(EvalError::EmptyLadder);
    }
    if ladder.windows(2).any(|w| w[0].parameter_count() > w[1].parameter_count()) {
        return Err(EvalError::UnsortedLadder);
    }
    let start = std::time::Instant::now();
    let mut attempts = Vec::new();
    let mut best: Option<(MlpModel, EscalationAttempt)> = None;
    for &arch in ladder {
        let outcome = train(init_model(arch, config.seed), training_set, config, &mut |_: &EpochRecord| {})?;
        let err = surface_error(&NeuralField::new(&outcome.model), mesh, surface_count, seed)?;
        let attempt = EscalationAttempt {
            architecture: arch,
            surface_error: err,
            training_loss: outcome.best_loss().unwrap_or(f64::NAN),
            epochs_ran: outcome.epochs_ran(),
        };
        attempts.push(attempt.clone());
        let better = best.as_ref().is_none_or(|(_, b)| err < b.surface_error);
        if better {
            best = Some((outcome.model, attempt));
        }
        if err <= target_error {
            break;
        }
    }
    let (model, chosen) = best.expect("ladder is nonempty");
    let met = chosen.surface_error <= target_error;
    let report = EvalReport {
        surface_error: chosen.surface_error,
        training_loss: chosen.training_loss,
        surface_sample_count: surface_count,
        epochs_ran: chosen.epochs_ran,
        file_bytes: file_size(&chosen.architecture),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(EscalationOutcome {
        model,
        report,
        met,
        attempts,
    })
}
