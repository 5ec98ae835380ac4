//! Procedural test meshes. All closed shapes are wound counter-clockwise
//! seen from outside.

use std::collections::HashMap;

use super::Mesh;
use crate::geom::Vec3;

/// Subdivided icosahedron with all vertices at `radius`.
pub fn icosphere(subdivisions: usize, radius: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    Mesh::new(verts, faces, format!("icosphere({subdivisions}, {radius})")).expect("icosphere is valid")
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> Mesh {
    let (nu, nv) = (major_segments.max(3), minor_segments.max(3));
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = i as f64 / nu as f64 * std::f64::consts::TAU;
        for j in 0..nv {
            let v = j as f64 / nv as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            verts.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(verts, faces, format!("torus({major}, {minor})")).expect("torus is valid")
}

/// Axis-aligned cube of half-width `half`.
pub fn cube(center: Vec3, half: f64) -> Mesh {
    let verts: Vec<Vec3> = (0..8u32)
        .map(|i| {
            let s = |bit: u32| if i & bit != 0 { half } else { -half };
            center + Vec3::new(s(1), s(2), s(4))
        })
        .collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    Mesh::new(verts, faces, "cube").expect("cube is valid")
}

/// A single open square made of two triangles, in the z = 0 plane.
pub fn quad_shell(half: f64) -> Mesh {
    let verts = vec![
        Vec3::new(-half, -half, 0.0),
        Vec3::new(half, -half, 0.0),
        Vec3::new(half, half, 0.0),
        Vec3::new(-half, half, 0.0),
    ];
    Mesh::new(verts, vec![[0, 1, 2], [0, 2, 3]], "quad").expect("quad is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Signed volume via the divergence theorem; positive for outward winding.
    fn signed_volume(m: &Mesh) -> f64 {
        (0..m.triangle_count())
            .map(|i| {
                let [a, b, c] = m.triangle(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn closed_shapes_wind_outward() {
        let s = icosphere(2, 0.5);
        assert_eq!(s.triangle_count(), 320);
        assert_eq!(s.vertices.len(), 162);
        let v = signed_volume(&s);
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!(v > 0.0 && v < ball && v > 0.9 * ball);

        let t = torus(0.6, 0.15, 48, 24);
        let analytic = 2.0 * std::f64::consts::PI.powi(2) * 0.6 * 0.15 * 0.15;
        let v = signed_volume(&t);
        assert!(v > 0.0 && (v - analytic).abs() < 0.03 * analytic, "{v} {analytic}");

        assert!((signed_volume(&cube(Vec3::zeros(), 1.0)) - 8.0).abs() < 1e-12);
    }
}
