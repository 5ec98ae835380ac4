//! The common interface over everything that answers signed distance
//! queries: the mesh oracle, grids, networks, analytic shapes and scenes.

use crate::geom::Vec3;

pub trait DistanceField: Sync {
    fn distance(&self, p: &Vec3) -> f64;

    /// Batched evaluation. Implementations must return exactly what
    /// per-point calls would.
    fn distance_batch(&self, points: &[Vec3]) -> Vec<f64> {
        points.iter().map(|p| self.distance(p)).collect()
    }
}

/// Adapts a closure into a field.
pub struct FnField<F>(pub F);

impl<F: Fn(&Vec3) -> f64 + Sync> DistanceField for FnField<F> {
    fn distance(&self, p: &Vec3) -> f64 {
        (self.0)(p)
    }
}

/// Exact signed distance to a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereField {
    pub center: Vec3,
    pub radius: f64,
}

impl SphereField {
    pub fn new(radius: f64) -> Self {
        Self {
            center: Vec3::zeros(),
            radius,
        }
    }
}

impl DistanceField for SphereField {
    fn distance(&self, p: &Vec3) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// A field that is the same constant everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub f64);

impl DistanceField for ConstantField {
    fn distance(&self, _p: &Vec3) -> f64 {
        self.0
    }
}
