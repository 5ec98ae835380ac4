//! Training-set generation.
//!
//! The importance strategy draws a uniform candidate pool `U` in the unit
//! ball, labels it with the distance oracle, and keeps a subset `S` chosen by
//! weighted sampling without replacement with probability proportional to
//! `exp(-beta * |sdf|)` (optionally multiplied by region-bias terms). The mean
//! loss over `S` then estimates the `w`-weighted loss over `U` up to the
//! constant `sum(w) / n`.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::DistanceField;
use crate::geom::Vec3;
use crate::mesh::{sample_surface, Mesh};

pub const DEFAULT_BETA: f64 = 30.0;
pub const FULL_CANDIDATES: usize = 10_000_000;
pub const FULL_SUBSET: usize = 1_000_000;
pub const DESK_SCALE: f64 = 0.01;
/// Width of the Gaussian kernel around each bias point.
pub const BIAS_SIGMA: f64 = 0.1;
pub const SAMPLE_DUMP_MAGIC: &[u8; 4] = b"NISA";

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("oracle returned {value} at candidate {index}")]
    OracleFailure { index: usize, value: f64 },
    #[error("strategy {0} needs the source mesh")]
    MeshRequired(&'static str),
    #[error("sample dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub position: Vec3,
    pub sdf: f64,
    pub weight: f64,
}

impl LabeledSample {
    pub fn new(position: Vec3, sdf: f64, weight: f64) -> Self {
        Self { position, sdf, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    Importance,
    Uniform,
    /// Mesh vertices plus isotropic Gaussian offsets.
    VertexGaussian { sigma: f64 },
    /// Area-uniform surface points plus isotropic Gaussian offsets.
    SurfaceGaussian { sigma: f64 },
}

impl SamplingStrategy {
    pub fn vertex_gaussian() -> Self {
        SamplingStrategy::VertexGaussian { sigma: 0.1 }
    }

    pub fn surface_gaussian() -> Self {
        SamplingStrategy::SurfaceGaussian { sigma: 0.01 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingStrategy::Importance => "importance",
            SamplingStrategy::Uniform => "uniform",
            SamplingStrategy::VertexGaussian { .. } => "vertex_gaussian",
            SamplingStrategy::SurfaceGaussian { .. } => "surface_gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub position: Vec3,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub candidate_count: usize,
    pub subset_count: usize,
    pub beta: f64,
    pub strategy: SamplingStrategy,
    pub bias_points: Vec<BiasPoint>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self::scaled(DESK_SCALE)
    }
}

impl SamplingConfig {
    /// Candidate and subset counts scaled from the full-size 10M / 1M.
    pub fn scaled(scale: f64) -> Self {
        Self {
            candidate_count: ((FULL_CANDIDATES as f64 * scale).round() as usize).max(1),
            subset_count: ((FULL_SUBSET as f64 * scale).round() as usize).max(1),
            beta: DEFAULT_BETA,
            strategy: SamplingStrategy::Importance,
            bias_points: Vec::new(),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        let bad = |m: String| Err(SamplingError::InvalidConfig(m));
        if self.subset_count > self.candidate_count {
            return bad(format!(
                "subset {} larger than candidate pool {}",
                self.subset_count, self.candidate_count
            ));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta {} must be non-negative", self.beta));
        }
        match self.strategy {
            SamplingStrategy::VertexGaussian { sigma } | SamplingStrategy::SurfaceGaussian { sigma } if !(sigma > 0.0) => {
                return bad(format!("sigma {sigma} must be positive"));
            }
            _ => {}
        }
        if self.bias_points.iter().any(|b| !(b.strength >= 0.0)) {
            return bad("bias strengths must be non-negative".into());
        }
        Ok(())
    }
}

/// `exp(-beta * |sdf|)`.
pub fn importance_weight(sdf_value: f64, beta: f64) -> f64 {
    (-beta * sdf_value.abs()).exp()
}

/// Importance weight times `1 + strength * exp(-|p - b|^2 / (2 * 0.1^2))` for
/// each bias point `b`.
pub fn combined_weight(sdf_value: f64, position: &Vec3, config: &SamplingConfig) -> f64 {
    let base = importance_weight(sdf_value, config.beta);
    config.bias_points.iter().fold(base, |w, b| {
        let d2 = (position - b.position).norm_squared();
        w * (1.0 + b.strength * (-d2 / (2.0 * BIAS_SIGMA * BIAS_SIGMA)).exp())
    })
}

/// Volume-uniform points in the closed unit ball (rejection from the cube).
pub fn sample_uniform_ball(count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if p.norm_squared() <= 1.0 {
            out.push(p);
        }
    }
    out
}

/// Weighted sampling of `m` distinct indices without replacement, using
/// exponential keys `ln(u) / w` and keeping the `m` largest. Returned in
/// ascending index order.
pub fn weighted_subset(weights: &[f64], m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let m = m.min(weights.len());
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random();
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    if m == 0 {
        return Vec::new();
    }
    let by_key_desc = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if m < keyed.len() {
        keyed.select_nth_unstable_by(m - 1, by_key_desc);
        keyed.truncate(m);
    }
    let mut idx: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

fn label(oracle: &dyn DistanceField, points: &[Vec3]) -> Result<Vec<f64>, SamplingError> {
    let labels: Vec<f64> = points.par_iter().map(|p| oracle.distance(p)).collect();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SamplingError::OracleFailure { index, value });
    }
    Ok(labels)
}

/// Gaussian-perturbed copies of `anchor(rng)`, redrawn until inside the unit ball.
fn perturbed(count: usize, sigma: f64, rng: &mut ChaCha8Rng, mut anchor: impl FnMut(&mut ChaCha8Rng) -> Vec3) -> Vec<Vec3> {
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = anchor(rng);
        let p = a + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        if p.norm_squared() <= 1.0 {
            out.push(p);
        }
    }
    out
}

/// Builds the training set `S` according to `config.strategy`. The Gaussian
/// strategies need the (normalized) mesh.
pub fn build_training_set(
    oracle: &dyn DistanceField,
    mesh: Option<&Mesh>,
    config: &SamplingConfig,
) -> Result<Vec<LabeledSample>, SamplingError> {
    config.validate()?;
    let m = config.subset_count;
    let labeled = |points: Vec<Vec3>| -> Result<Vec<LabeledSample>, SamplingError> {
        let sdf = label(oracle, &points)?;
        Ok(points
            .into_iter()
            .zip(sdf)
            .map(|(p, s)| LabeledSample::new(p, s, combined_weight(s, &p, config)))
            .collect())
    };
    match config.strategy {
        SamplingStrategy::Importance => {
            let pool = labeled(sample_uniform_ball(config.candidate_count, config.seed))?;
            let weights: Vec<f64> = pool.iter().map(|s| s.weight).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            let chosen = weighted_subset(&weights, m, &mut rng);
            Ok(chosen.into_iter().map(|i| pool[i]).collect())
        }
        SamplingStrategy::Uniform => {
            let mut pool = sample_uniform_ball(config.candidate_count, config.seed);
            pool.truncate(m);
            labeled(pool)
        }
        SamplingStrategy::VertexGaussian { sigma } => {
            let mesh = mesh.ok_or(SamplingError::MeshRequired("vertex_gaussian"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let n = mesh.vertices.len();
            let pts = perturbed(m, sigma, &mut rng, |r| mesh.vertices[r.random_range(0..n)]);
            labeled(pts)
        }
        SamplingStrategy::SurfaceGaussian { sigma } => {
            let mesh = mesh.ok_or(SamplingError::MeshRequired("surface_gaussian"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            // anchors come from a separate, seed-derived surface draw
            let anchors = sample_surface(mesh, m.max(1), config.seed ^ 0x5eed);
            let mut k = 0usize;
            let pts = perturbed(m, sigma, &mut rng, |_| {
                let a = anchors[k % anchors.len()];
                k += 1;
                a
            });
            labeled(pts)
        }
    }
}

/// `NISA`, `u64` count, then `x y z sdf` as little-endian `f32` per sample.
pub fn write_sample_dump(samples: &[LabeledSample], mut out: impl Write) -> std::io::Result<()> {
    out.write_all(SAMPLE_DUMP_MAGIC)?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        for v in [s.position.x, s.position.y, s.position.z, s.sdf] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_sample_dump(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<(), SamplingError> {
    let f = std::fs::File::create(path).map_err(|e| SamplingError::Dump(e.to_string()))?;
    let mut w = std::io::BufWriter::new(f);
    write_sample_dump(samples, &mut w).map_err(|e| SamplingError::Dump(e.to_string()))?;
    w.flush().map_err(|e| SamplingError::Dump(e.to_string()))
}

/// Reads a dump back as `(position, sdf)` pairs in `f32` precision.
pub fn read_sample_dump(mut input: impl Read) -> Result<Vec<(Vec3, f64)>, SamplingError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| SamplingError::Dump(e.to_string()))?;
    if bytes.len() < 12 || &bytes[..4] != SAMPLE_DUMP_MAGIC {
        return Err(SamplingError::Dump("bad header".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + 16 * n {
        return Err(SamplingError::Dump(format!("expected {n} samples")));
    }
    Ok(bytes[12..]
        .chunks_exact(16)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            (Vec3::new(f(0), f(1), f(2)), f(3))
        })
        .collect())
}
