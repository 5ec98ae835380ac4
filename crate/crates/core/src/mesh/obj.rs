use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, MeshError};
use crate::geom::Vec3;

/// Parses `v` and `f` records. Faces with more than three corners are fan
/// triangulated; `/`-separated texture and normal indices are ignored.
pub fn parse_obj(text: &str, source: impl Into<String>) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::line(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(MeshError::line(line_no, "vertex needs three finite coordinates"));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut corners = Vec::new();
                for tok in parts {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| MeshError::line(line_no, format!("bad face index {tok:?}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        n + idx
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(MeshError::line(
                            line_no,
                            format!("face index {idx} out of range for {n} vertices"),
                        ));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(MeshError::line(line_no, "face needs at least three corners"));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    Mesh::new(vertices, triangles, source)
}

pub fn write_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|source| MeshError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "t.obj").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_index() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n", "").unwrap_err();
        match err {
            MeshError::MalformedRecord { location, .. } => assert_eq!(location, "line 4"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn negative_and_slashed_indices_and_quads() {
        let src = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf -4/1/1 -3/2/1 -2//1 -1\n";
        let m = parse_obj(src, "").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn no_faces_is_empty() {
        assert!(matches!(parse_obj("v 0 0 0\n", ""), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn garbage_coordinate() {
        assert!(matches!(parse_obj("v 0 x 0\n", ""), Err(MeshError::MalformedRecord { .. })));
    }
}
