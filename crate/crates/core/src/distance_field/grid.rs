use std::path::Path;

use super::DistanceError;
use crate::field::DistanceField;
use crate::geom::Vec3;

pub const GRID_MAGIC: &[u8; 4] = b"SDFG";
pub const GRID_HEADER_BYTES: usize = 4 + 4 + 6 * 8;

/// Signed distances sampled on a regular `R^3` lattice spanning `[-1, 1]^3`,
/// stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub resolution: usize,
    pub min: Vec3,
    pub max: Vec3,
    pub values: Vec<f32>,
}

impl SdfGrid {
    pub fn spacing(&self) -> Vec3 {
        (self.max - self.min) / (self.resolution - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn lattice_point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let s = self.spacing();
        Vec3::new(
            self.min.x + i as f64 * s.x,
            self.min.y + j as f64 * s.y,
            self.min.z + k as f64 * s.z,
        )
    }

    pub fn byte_size(&self) -> usize {
        GRID_HEADER_BYTES + 4 * self.values.len()
    }

    pub fn payload_bytes(&self) -> usize {
        4 * self.values.len()
    }

    /// Trilinear interpolation of the eight lattice values around `q`;
    /// points outside the grid are clamped to its boundary.
    pub fn query(&self, q: &Vec3) -> f64 {
        let r = self.resolution;
        let s = self.spacing();
        let mut idx = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..3 {
            let mut f = ((q[a] - self.min[a]) / s[a]).clamp(0.0, (r - 1) as f64);
            // snap lattice coordinates that picked up rounding noise
            let nearest = f.round();
            if (f - nearest).abs() < 1e-9 {
                f = nearest;
            }
            let i = (f.floor() as usize).min(r - 2);
            idx[a] = i;
            t[a] = f - i as f64;
        }
        let v = |di: usize, dj: usize, dk: usize| self.values[self.index(idx[0] + di, idx[1] + dj, idx[2] + dk)] as f64;
        let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;
        let x00 = lerp(v(0, 0, 0), v(1, 0, 0), t[0]);
        let x10 = lerp(v(0, 1, 0), v(1, 1, 0), t[0]);
        let x01 = lerp(v(0, 0, 1), v(1, 0, 1), t[0]);
        let x11 = lerp(v(0, 1, 1), v(1, 1, 1), t[0]);
        let y0 = lerp(x00, x10, t[1]);
        let y1 = lerp(x01, x11, t[1]);
        lerp(y0, y1, t[2])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_size());
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&(self.resolution as u32).to_le_bytes());
        for v in [self.min, self.max] {
            for a in 0..3 {
                out.extend_from_slice(&v[a].to_le_bytes());
            }
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DistanceError> {
        let bad = |m: &str| DistanceError::GridFormat(m.to_string());
        if bytes.len() < GRID_HEADER_BYTES {
            return Err(bad("truncated header"));
        }
        if &bytes[0..4] != GRID_MAGIC {
            return Err(bad("bad magic"));
        }
        let resolution = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if resolution < 2 {
            return Err(bad("resolution below 2"));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let min = Vec3::new(f64_at(8), f64_at(16), f64_at(24));
        let max = Vec3::new(f64_at(32), f64_at(40), f64_at(48));
        let n = resolution
            .checked_pow(3)
            .ok_or_else(|| bad("resolution overflows"))?;
        if bytes.len() != GRID_HEADER_BYTES + 4 * n {
            return Err(bad("payload length does not match resolution"));
        }
        let values = bytes[GRID_HEADER_BYTES..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            resolution,
            min,
            max,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DistanceError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| DistanceError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DistanceError> {
        let bytes = std::fs::read(path).map_err(|e| DistanceError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

impl DistanceField for SdfGrid {
    fn distance(&self, p: &Vec3) -> f64 {
        self.query(p)
    }
}

/// Samples `field` at every lattice point of a `resolution^3` grid over
/// `[-1, 1]^3`.
pub fn build_sdf_grid(field: &dyn DistanceField, resolution: usize) -> Result<SdfGrid, DistanceError> {
    if resolution < 2 {
        return Err(DistanceError::GridFormat(format!("resolution {resolution} below 2")));
    }
    let mut grid = SdfGrid {
        resolution,
        min: Vec3::repeat(-1.0),
        max: Vec3::repeat(1.0),
        values: Vec::with_capacity(resolution.pow(3)),
    };
    for k in 0..resolution {
        for j in 0..resolution {
            for i in 0..resolution {
                let p = grid.lattice_point(i, j, k);
                grid.values.push(field.distance(&p) as f32);
            }
        }
    }
    Ok(grid)
}
