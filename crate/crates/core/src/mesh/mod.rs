//! Triangle meshes: loading, normalization into the unit sphere, and
//! area-uniform surface sampling.

mod obj;
pub mod shapes;
mod stl;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{triangle_area, Aabb, Vec3};

pub use obj::{parse_obj, write_obj};
pub use stl::{parse_stl_ascii, parse_stl_binary, write_stl_ascii, write_stl_binary, STL_WELD_TOLERANCE};

/// Triangles whose area, measured after normalization, falls below this are
/// dropped at load.
pub const DEGENERATE_AREA: f64 = 1e-12;

pub const DEFAULT_PADDING: f64 = 0.1;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unreadable file {path}: {source}")]
    UnreadableFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {location}: {message}")]
    MalformedRecord { location: String, message: String },
    #[error("mesh has no usable triangles")]
    EmptyMesh,
    #[error("unrecognized mesh format for {0}")]
    UnknownFormat(String),
    #[error("padding {0} outside [0, 0.5)")]
    BadPadding(f64),
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MeshError {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        MeshError::MalformedRecord {
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub(crate) fn offset(offset: usize, message: impl Into<String>) -> Self {
        MeshError::MalformedRecord {
            location: format!("byte offset {offset}"),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlBinary,
    StlAscii,
}

impl MeshFormat {
    /// Picks a format from the extension; `.stl` files are told apart by
    /// checking whether the byte length matches the binary facet count.
    pub fn detect(path: &Path, bytes: &[u8]) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => {
                if bytes.len() >= 84 {
                    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
                    if bytes.len() == 84 + 50 * n {
                        return Some(MeshFormat::StlBinary);
                    }
                }
                if bytes.trim_ascii_start().starts_with(b"solid") {
                    Some(MeshFormat::StlAscii)
                } else {
                    Some(MeshFormat::StlBinary)
                }
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub source_path: String,
    /// Triangles removed at construction for having (near) zero area.
    pub dropped_degenerate: usize,
}

impl Mesh {
    /// Builds a mesh, validating indices and dropping degenerate triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, source_path: impl Into<String>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= n) {
                return Err(MeshError::MalformedRecord {
                    location: format!("triangle {i}"),
                    message: format!("index out of range for {n} vertices"),
                });
            }
        }
        // Degeneracy is judged in normalized units, so scale areas by the
        // square of the normalization factor the mesh would receive.
        let bbox = Aabb::from_points(&vertices);
        let center = bbox.center();
        let radius = vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
        let area_scale = if radius > 0.0 { 1.0 / (radius * radius) } else { 0.0 };

        let input = triangles.len();
        let kept: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                t[0] != t[1]
                    && t[1] != t[2]
                    && t[0] != t[2]
                    && triangle_area(&vertices[t[0] as usize], &vertices[t[1] as usize], &vertices[t[2] as usize])
                        * area_scale
                        >= DEGENERATE_AREA
            })
            .collect();
        if kept.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        Ok(Self {
            dropped_degenerate: input - kept.len(),
            vertices,
            triangles: kept,
            source_path: source_path.into(),
        })
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangle_count())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// A new mesh with a subset of this mesh's triangles (same vertices).
    pub fn with_triangles(&self, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        Mesh::new(self.vertices.clone(), triangles, self.source_path.clone())
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| MeshError::UnreadableFile {
        path: path.display().to_string(),
        source,
    })?;
    let format = match format {
        Some(f) => f,
        None => MeshFormat::detect(path, &bytes).ok_or_else(|| MeshError::UnknownFormat(path.display().to_string()))?,
    };
    let name = path.display().to_string();
    match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            parse_obj(&text, name)
        }
        MeshFormat::StlBinary => parse_stl_binary(&bytes, name),
        MeshFormat::StlAscii => {
            let text = String::from_utf8_lossy(&bytes);
            parse_stl_ascii(&text, name)
        }
    }
}

/// Uniform scale plus translation taking model coordinates into the unit
/// sphere: `normalized = (p + translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for NormalizationTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p + self.translation) * self.scale
    }

    pub fn inverse_apply(&self, p: &Vec3) -> Vec3 {
        p / self.scale - self.translation
    }

    /// Row-major 3x4 affine matrix of the forward map.
    pub fn to_affine(&self) -> [f64; 12] {
        let s = self.scale;
        let t = self.translation * s;
        [s, 0.0, 0.0, t.x, 0.0, s, 0.0, t.y, 0.0, 0.0, s, t.z]
    }

    /// Recovers scale and translation from a 3x4 affine that has the
    /// rotation-free uniform-scale shape produced by [`to_affine`](Self::to_affine).
    pub fn from_affine(m: &[f64; 12]) -> Option<Self> {
        let s = m[0];
        let is_uniform = m[5] == s && m[10] == s && [m[1], m[2], m[4], m[6], m[8], m[9]].iter().all(|&v| v == 0.0);
        if !is_uniform || !(s > 0.0) || !s.is_finite() {
            return None;
        }
        Some(Self {
            scale: s,
            translation: Vec3::new(m[3], m[7], m[11]) / s,
        })
    }
}

/// Centers the mesh on its bounding-box center and scales it so that the
/// farthest vertex lands at radius `1 - padding`.
pub fn normalize_to_unit_sphere(mesh: &Mesh, padding: f64) -> Result<(Mesh, NormalizationTransform), MeshError> {
    if !(0.0..0.5).contains(&padding) {
        return Err(MeshError::BadPadding(padding));
    }
    if mesh.triangles.is_empty() || mesh.vertices.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let translation = -mesh.bounding_box().center();
    let max_norm = mesh
        .vertices
        .iter()
        .map(|v| (v + translation).norm())
        .fold(0.0, f64::max);
    if !(max_norm > 0.0) {
        return Err(MeshError::EmptyMesh);
    }
    let transform = NormalizationTransform {
        translation,
        scale: (1.0 - padding) / max_norm,
    };
    let vertices = mesh.vertices.iter().map(|v| transform.apply(v)).collect();
    let out = Mesh {
        vertices,
        triangles: mesh.triangles.clone(),
        source_path: mesh.source_path.clone(),
        dropped_degenerate: mesh.dropped_degenerate,
    };
    Ok((out, transform))
}

/// Area-uniform points on the surface: a triangle is chosen with
/// probability proportional to its area, then a uniform point on it.
pub fn sample_surface(mesh: &Mesh, count: usize, seed: u64) -> Vec<Vec3> {
    let mut cdf = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(i);
        total += triangle_area(&a, &b, &c);
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(idx);
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(half: f64) -> Mesh {
        shapes::cube(Vec3::zeros(), half)
    }

    #[test]
    fn normalize_cube_puts_corners_on_sphere() {
        let (m, t) = normalize_to_unit_sphere(&cube(2.0), 0.0).unwrap();
        assert!((t.scale - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
        for v in &m.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_offset_sphere() {
        let s = shapes::icosphere(2, 1.0);
        // put extreme vertices exactly at radius 3 around (5,0,0)
        let verts = s.vertices.iter().map(|v| v * 3.0 + Vec3::new(5.0, 0.0, 0.0)).collect();
        let m = Mesh::new(verts, s.triangles.clone(), "").unwrap();
        let (n, t) = normalize_to_unit_sphere(&m, 0.1).unwrap();
        assert!((t.translation - Vec3::new(-5.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((t.scale - 0.3).abs() < 1e-12);
        assert!(n.vertices.iter().all(|v| v.norm() <= 0.9 + 1e-12));
    }

    #[test]
    fn normalize_is_idempotent() {
        let (once, _) = normalize_to_unit_sphere(&shapes::torus(0.6, 0.15, 24, 12), 0.0).unwrap();
        let (_, t2) = normalize_to_unit_sphere(&once, 0.0).unwrap();
        assert!(t2.translation.norm() < 1e-9);
        assert!((t2.scale - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_round_trip() {
        let orig = shapes::torus(3.0, 1.0, 16, 8);
        let orig = Mesh::new(
            orig.vertices.iter().map(|v| v + Vec3::new(10.0, -4.0, 2.5)).collect(),
            orig.triangles.clone(),
            "",
        )
        .unwrap();
        let (n, t) = normalize_to_unit_sphere(&orig, 0.1).unwrap();
        for (a, b) in orig.vertices.iter().zip(&n.vertices) {
            let back = t.inverse_apply(b);
            assert!((back - a).norm() <= 1e-6 * a.norm().max(1.0));
        }
    }

    #[test]
    fn bad_padding_rejected() {
        assert!(matches!(normalize_to_unit_sphere(&cube(1.0), 0.5), Err(MeshError::BadPadding(_))));
    }

    #[test]
    fn affine_round_trip() {
        let t = NormalizationTransform {
            translation: Vec3::new(-5.0, 0.25, 3.0),
            scale: 0.5,
        };
        assert_eq!(NormalizationTransform::from_affine(&t.to_affine()), Some(t));
        let mut m = t.to_affine();
        m[1] = 0.1;
        assert_eq!(NormalizationTransform::from_affine(&m), None);
    }

    #[test]
    fn degenerate_triangles_are_counted() {
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        // second is collinear, third repeats an index
        let m = Mesh::new(verts, vec![[0, 1, 2], [0, 1, 3], [0, 0, 2]], "").unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.dropped_degenerate, 2);
    }

    #[test]
    fn all_degenerate_is_empty() {
        let verts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert!(matches!(Mesh::new(verts, vec![[0, 1, 2]], ""), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn surface_samples_stay_in_triangle() {
        let verts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let m = Mesh::new(verts, vec![[0, 1, 2]], "").unwrap();
        for p in sample_surface(&m, 2000, 3) {
            assert_eq!(p.z, 0.0);
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn surface_sampling_is_area_weighted() {
        // areas 1 and 3
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(12.0, 0.0, 0.0),
            Vec3::new(10.0, 3.0, 0.0),
        ];
        let m = Mesh::new(verts, vec![[0, 1, 2], [3, 4, 5]], "").unwrap();
        let pts = sample_surface(&m, 1_000_000, 11);
        let frac = pts.iter().filter(|p| p.x >= 5.0).count() as f64 / pts.len() as f64;
        assert!((frac - 0.75).abs() < 0.005, "{frac}");
    }

    #[test]
    fn surface_sampling_is_seed_deterministic() {
        let m = shapes::icosphere(1, 0.5);
        assert_eq!(sample_surface(&m, 100, 5), sample_surface(&m, 100, 5));
        assert_ne!(sample_surface(&m, 100, 5), sample_surface(&m, 100, 6));
    }

    #[test]
    fn icosphere_mean_norm_matches_dense_average() {
        let m = shapes::icosphere(2, 1.0);
        let pts = sample_surface(&m, 100_000, 1);
        let mean = pts.iter().map(|p| p.norm()).sum::<f64>() / pts.len() as f64;
        // Brute-force area-weighted average over a dense barycentric lattice
        // on every facet.
        let k = 40;
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..m.triangle_count() {
            let [a, b, c] = m.triangle(t);
            let area = triangle_area(&a, &b, &c);
            let mut s = 0.0;
            let mut cnt = 0.0;
            for i in 0..k {
                for j in 0..k - i {
                    // centroids of the sub-triangles of a k-subdivision
                    let u = (i as f64 + 1.0 / 3.0) / k as f64;
                    let v = (j as f64 + 1.0 / 3.0) / k as f64;
                    s += (a + (b - a) * u + (c - a) * v).norm();
                    cnt += 1.0;
                }
            }
            num += area * s / cnt;
            den += area;
        }
        let expected = num / den;
        assert!((mean - expected).abs() < 1e-3, "{mean} vs {expected}");
    }
}
