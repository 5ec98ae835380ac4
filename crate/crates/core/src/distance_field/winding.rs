//! Generalized winding numbers: the exact per-triangle solid-angle sum and a
//! tree-accelerated far-field approximation over the BVH.

use std::f64::consts::PI;

use super::bvh::{Bvh, NodeKind};
use super::{DistanceError, ON_SURFACE_EPSILON};
use crate::geom::{point_triangle_distance, solid_angle, triangle_area, Vec3};
use crate::mesh::Mesh;

const FOUR_PI: f64 = 4.0 * PI;

pub const DEFAULT_ACCURACY_BETA: f64 = 2.0;

/// Exact winding number of `mesh` at `q`: total signed solid angle over 4π.
pub fn winding_number_exact(mesh: &Mesh, q: &Vec3) -> Result<f64, DistanceError> {
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        if point_triangle_distance(q, &a, &b, &c) < ON_SURFACE_EPSILON {
            return Err(DistanceError::OnSurface);
        }
        total += solid_angle(q, &a, &b, &c);
    }
    Ok(total / FOUR_PI)
}

/// Aggregate of all triangles below a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMoments {
    /// Sum of area-weighted unit normals (half the edge cross products).
    pub dipole: Vec3,
    /// Area-weighted centroid.
    pub centroid: Vec3,
    pub area: f64,
    /// Largest distance from `centroid` to any vertex below the node.
    pub radius: f64,
}

/// Per-node moments mirroring the node layout of a [`Bvh`].
#[derive(Debug, Clone)]
pub struct WindingTree {
    pub moments: Vec<NodeMoments>,
}

impl WindingTree {
    pub fn build(bvh: &Bvh) -> Self {
        let mut moments = vec![
            NodeMoments {
                dipole: Vec3::zeros(),
                centroid: Vec3::zeros(),
                area: 0.0,
                radius: 0.0,
            };
            bvh.nodes.len()
        ];
        fill(bvh, 0, &mut moments);
        Self { moments }
    }

    /// Barnes-Hut style evaluation: a node whose centroid is farther than
    /// `accuracy_beta` times its radius contributes its dipole term; closer
    /// nodes recurse, and leaves are summed exactly.
    pub fn winding_number(&self, bvh: &Bvh, q: &Vec3, accuracy_beta: f64) -> Result<f64, DistanceError> {
        let mut acc = 0.0;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let m = &self.moments[ni as usize];
            let r = m.centroid - q;
            let d = r.norm();
            if d > accuracy_beta * m.radius {
                acc += m.dipole.dot(&r) / (FOUR_PI * d * d * d);
                continue;
            }
            match bvh.nodes[ni as usize].kind {
                NodeKind::Leaf { start, count } => {
                    for &t in bvh.leaf_triangles(start, count) {
                        let [a, b, c] = bvh.triangle(t as usize);
                        if point_triangle_distance(q, a, b, c) < ON_SURFACE_EPSILON {
                            return Err(DistanceError::OnSurface);
                        }
                        acc += solid_angle(q, a, b, c) / FOUR_PI;
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        Ok(acc)
    }

    /// Exact winding number accumulated in the same leaf order the tree
    /// traversal uses, so it matches [`winding_number`](Self::winding_number)
    /// bit for bit when no approximation is taken.
    pub fn exact_in_tree_order(&self, bvh: &Bvh, q: &Vec3) -> Result<f64, DistanceError> {
        let mut acc = 0.0;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            match bvh.nodes[ni as usize].kind {
                NodeKind::Leaf { start, count } => {
                    for &t in bvh.leaf_triangles(start, count) {
                        let [a, b, c] = bvh.triangle(t as usize);
                        if point_triangle_distance(q, a, b, c) < ON_SURFACE_EPSILON {
                            return Err(DistanceError::OnSurface);
                        }
                        acc += solid_angle(q, a, b, c) / FOUR_PI;
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        Ok(acc)
    }
}

/// Fills moments bottom-up and returns the `order` range covered by `ni`.
fn fill(bvh: &Bvh, ni: usize, out: &mut [NodeMoments]) -> (usize, usize) {
    let (start, end, dipole, weighted, area) = match bvh.nodes[ni].kind {
        NodeKind::Leaf { start, count } => {
            let mut dipole = Vec3::zeros();
            let mut weighted = Vec3::zeros();
            let mut area = 0.0;
            for &t in bvh.leaf_triangles(start, count) {
                let [a, b, c] = bvh.triangle(t as usize);
                let ta = triangle_area(a, b, c);
                dipole += (b - a).cross(&(c - a)) * 0.5;
                weighted += (a + b + c) / 3.0 * ta;
                area += ta;
            }
            (start as usize, (start + count) as usize, dipole, weighted, area)
        }
        NodeKind::Internal { left, right } => {
            let (s, _) = fill(bvh, left as usize, out);
            let (_, e) = fill(bvh, right as usize, out);
            let (l, r) = (out[left as usize], out[right as usize]);
            (
                s,
                e,
                l.dipole + r.dipole,
                l.centroid * l.area + r.centroid * r.area,
                l.area + r.area,
            )
        }
    };
    let centroid = if area > 0.0 { weighted / area } else { bvh.nodes[ni].aabb.center() };
    let radius = bvh.order[start..end]
        .iter()
        .flat_map(|&t| bvh.triangle(t as usize).iter())
        .map(|v| (v - centroid).norm())
        .fold(0.0, f64::max);
    out[ni] = NodeMoments {
        dipole,
        centroid,
        area,
        radius,
    };
    (start, end)
}
