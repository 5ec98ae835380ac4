use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, MeshError};
use crate::geom::Vec3;

/// Absolute distance (source units) within which STL corners are merged.
pub const STL_WELD_TOLERANCE: f64 = 1e-8;

/// Merges corner positions closer than [`STL_WELD_TOLERANCE`], returning the
/// welded vertex list and one index per input corner.
fn weld(corners: &[Vec3]) -> (Vec<Vec3>, Vec<u32>) {
    let cell = |p: &Vec3| -> [i64; 3] {
        [
            (p.x / STL_WELD_TOLERANCE).floor() as i64,
            (p.y / STL_WELD_TOLERANCE).floor() as i64,
            (p.z / STL_WELD_TOLERANCE).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut indices = Vec::with_capacity(corners.len());
    for p in corners {
        let c = cell(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &vi in bucket {
                            if (vertices[vi as usize] - p).norm() <= STL_WELD_TOLERANCE {
                                found = Some(vi);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = found.unwrap_or_else(|| {
            let vi = vertices.len() as u32;
            vertices.push(*p);
            grid.entry(c).or_default().push(vi);
            vi
        });
        indices.push(idx);
    }
    (vertices, indices)
}

fn from_corners(corners: Vec<Vec3>, source: String) -> Result<Mesh, MeshError> {
    if corners.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let (vertices, indices) = weld(&corners);
    let triangles = indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Mesh::new(vertices, triangles, source)
}

/// 80-byte header, little-endian `u32` facet count, then 50-byte facets
/// (normal, three corners, attribute word).
pub fn parse_stl_binary(bytes: &[u8], source: impl Into<String>) -> Result<Mesh, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::offset(bytes.len(), "file shorter than the 84-byte STL preamble"));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() < expected {
        return Err(MeshError::offset(
            bytes.len(),
            format!("{count} facets declared, need {expected} bytes"),
        ));
    }
    let f32_at = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut corners = Vec::with_capacity(count * 3);
    for f in 0..count {
        let base = 84 + 50 * f + 12;
        for k in 0..3 {
            let o = base + 12 * k;
            let p = Vec3::new(f32_at(o), f32_at(o + 4), f32_at(o + 8));
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MeshError::offset(o, "non-finite vertex coordinate"));
            }
            corners.push(p);
        }
    }
    from_corners(corners, source.into())
}

pub fn parse_stl_ascii(text: &str, source: impl Into<String>) -> Result<Mesh, MeshError> {
    let mut corners = Vec::new();
    let mut in_loop = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut parts = raw.split_whitespace();
        match parts.next() {
            Some("vertex") => {
                let c: Vec<f64> = parts
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::line(line_no, format!("bad vertex: {e}")))?;
                if c.len() != 3 {
                    return Err(MeshError::line(line_no, "vertex needs three coordinates"));
                }
                corners.push(Vec3::new(c[0], c[1], c[2]));
                in_loop += 1;
            }
            Some("outer") => in_loop = 0,
            Some("endloop") => {
                if in_loop != 3 {
                    return Err(MeshError::line(line_no, format!("loop has {in_loop} vertices, expected 3")));
                }
            }
            Some("solid" | "facet" | "endfacet" | "endsolid") | None => {}
            Some(other) => return Err(MeshError::line(line_no, format!("unexpected keyword {other:?}"))),
        }
    }
    if corners.len() % 3 != 0 {
        return Err(MeshError::line(text.lines().count(), "incomplete facet"));
    }
    from_corners(corners, source.into())
}

fn facet_normal(m: &Mesh, i: usize) -> Vec3 {
    let [a, b, c] = m.triangle(i);
    (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
}

pub fn write_stl_binary(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut out = vec![0u8; 80];
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for i in 0..mesh.triangle_count() {
        let n = facet_normal(mesh, i);
        let [a, b, c] = mesh.triangle(i);
        for v in [n, a, b, c] {
            for k in 0..3 {
                out.extend_from_slice(&(v[k] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|source| MeshError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_stl_ascii(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut out = String::from("solid mesh\n");
    for i in 0..mesh.triangle_count() {
        let n = facet_normal(mesh, i);
        let _ = writeln!(out, "  facet normal {} {} {}\n    outer loop", n.x, n.y, n.z);
        for v in mesh.triangle(i) {
            let _ = writeln!(out, "      vertex {} {} {}", v.x, v.y, v.z);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    out.push_str("endsolid mesh\n");
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|source| MeshError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}
