use crate::geom::{point_triangle_distance, Aabb, Vec3};
use crate::mesh::Mesh;

pub const MAX_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// Range `start..start + count` into [`Bvh::order`].
    Leaf { start: u32, count: u32 },
    Internal { left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvhNode {
    pub aabb: Aabb,
    pub kind: NodeKind,
}

/// Bounding volume hierarchy over a mesh's triangles. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    /// Triangle indices permuted so every leaf owns a contiguous range.
    pub order: Vec<u32>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    /// Top-down build: split each node at the median triangle centroid along
    /// the longest axis of its bounding box until at most
    /// [`MAX_LEAF_SIZE`] triangles remain.
    pub fn build(mesh: &Mesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.triangle_count()).map(|i| mesh.triangle(i)).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|[a, b, c]| (a + b + c) / 3.0).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / MAX_LEAF_SIZE + 1);
        build_node(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        Self { nodes, order, triangles }
    }

    pub fn triangle(&self, i: usize) -> &[Vec3; 3] {
        &self.triangles[i]
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[BvhNode], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => 1,
                NodeKind::Internal { left, right } => 1 + rec(nodes, left as usize).max(rec(nodes, right as usize)),
            }
        }
        rec(&self.nodes, 0)
    }

    /// Triangle indices owned by a leaf.
    pub fn leaf_triangles(&self, start: u32, count: u32) -> &[u32] {
        &self.order[start as usize..(start + count) as usize]
    }

    /// Exact distance from `q` to the closest triangle, with the index of
    /// that triangle. Nodes whose box is farther than the current best are
    /// skipped; the nearer child is visited first.
    pub fn nearest(&self, q: &Vec3) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_sq = f64::INFINITY;
        let mut best_tri = 0usize;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].aabb.distance_squared(q)));
        while let Some((ni, box_sq)) = stack.pop() {
            if box_sq > best_sq {
                continue;
            }
            match self.nodes[ni as usize].kind {
                NodeKind::Leaf { start, count } => {
                    for &t in self.leaf_triangles(start, count) {
                        let [a, b, c] = &self.triangles[t as usize];
                        let d = point_triangle_distance(q, a, b, c);
                        if d < best || (d == best && (t as usize) < best_tri) {
                            best = d;
                            best_tri = t as usize;
                            // a hair of slack so rounding in the box bound never prunes a tie
                            best_sq = d * d * (1.0 + 1e-12);
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    let dl = self.nodes[left as usize].aabb.distance_squared(q);
                    let dr = self.nodes[right as usize].aabb.distance_squared(q);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        (best, best_tri)
    }
}

fn build_node(
    triangles: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> u32 {
    let slice = &order[start..end];
    let aabb = Aabb::from_points(slice.iter().flat_map(|&t| triangles[t as usize].iter()));
    let index = nodes.len() as u32;
    nodes.push(BvhNode {
        aabb,
        kind: NodeKind::Leaf {
            start: start as u32,
            count: (end - start) as u32,
        },
    });
    if end - start <= MAX_LEAF_SIZE {
        return index;
    }
    let axis = aabb.longest_axis();
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = build_node(triangles, centroids, order, start, mid, nodes);
    let right = build_node(triangles, centroids, order, mid, end, nodes);
    nodes[index as usize].kind = NodeKind::Internal { left, right };
    index
}
