//! Ground-truth signed distance for triangle meshes.
//!
//! Unsigned distance comes from an exact nearest-triangle query over a
//! [`Bvh`]; the sign comes from the generalized winding number, evaluated
//! with the tree approximation in [`WindingTree`]. A query is inside when
//! the winding number exceeds one half.

mod bvh;
mod grid;
mod winding;

use thiserror::Error;

pub use bvh::{Bvh, BvhNode, NodeKind, MAX_LEAF_SIZE};
pub use grid::{build_sdf_grid, SdfGrid, GRID_HEADER_BYTES, GRID_MAGIC};
pub use winding::{winding_number_exact, NodeMoments, WindingTree, DEFAULT_ACCURACY_BETA};

use crate::field::DistanceField;
use crate::geom::Vec3;
use crate::mesh::Mesh;

/// Queries closer than this to a triangle count as on the surface.
pub const ON_SURFACE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("query point lies on the surface")]
    OnSurface,
    #[error("grid format: {0}")]
    GridFormat(String),
    #[error("io: {0}")]
    Io(String),
}

/// Everything needed to answer signed distance queries against one mesh.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    pub bvh: Bvh,
    pub tree: WindingTree,
    pub accuracy_beta: f64,
}

impl MeshSdf {
    pub fn new(mesh: &Mesh) -> Self {
        Self::with_accuracy(mesh, DEFAULT_ACCURACY_BETA)
    }

    pub fn with_accuracy(mesh: &Mesh, accuracy_beta: f64) -> Self {
        let bvh = Bvh::build(mesh);
        let tree = WindingTree::build(&bvh);
        Self {
            bvh,
            tree,
            accuracy_beta,
        }
    }

    pub fn unsigned_distance(&self, q: &Vec3) -> (f64, usize) {
        self.bvh.nearest(q)
    }

    pub fn winding_number(&self, q: &Vec3) -> Result<f64, DistanceError> {
        self.tree.winding_number(&self.bvh, q, self.accuracy_beta)
    }

    /// Negative inside, positive outside, zero on the surface.
    pub fn signed_distance(&self, q: &Vec3) -> f64 {
        let (d, _) = self.unsigned_distance(q);
        if d < ON_SURFACE_EPSILON {
            return 0.0;
        }
        match self.winding_number(q) {
            Ok(w) if w > 0.5 => -d,
            Ok(_) => d,
            Err(DistanceError::OnSurface) => 0.0,
            Err(_) => d,
        }
    }
}

impl DistanceField for MeshSdf {
    fn distance(&self, p: &Vec3) -> f64 {
        self.signed_distance(p)
    }
}
