//! The `.ni` neural implicit file: a fixed header describing the network,
//! the normalization transform, then the raw parameters.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "NIMP"
//!      4     1  version (1)
//!      5     2  hidden layer count, u16 LE
//!      7     2  hidden width, u16 LE
//!      9     1  hidden activation (0 = ReLU)
//!     10     1  output activation (0 = TanH)
//!     11    48  3x4 row-major affine, 12 x f32 LE
//!     59  4*P  parameters, f32 LE, layer by layer, weights then biases
//! ```

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::field::DistanceField;
use crate::geom::Vec3;
use crate::mesh::NormalizationTransform;
use crate::neural::{forward_with, MlpArchitecture, MlpModel, Scratch};

pub const MAGIC: &[u8; 4] = b"NIMP";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 4 + 1 + 2 + 2 + 1 + 1;
pub const TRANSFORM_BYTES: usize = 12 * 4;
pub const ACTIVATION_RELU: u8 = 0;
pub const ACTIVATION_TANH: u8 = 0;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"NIMP\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("payload is {got} bytes, header declares {expected}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unknown activation code {0}")]
    UnknownActivationCode(u8),
    #[error("invalid architecture in header: {0}")]
    InvalidArchitecture(String),
    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Exact byte size of a file holding `arch`.
pub fn file_size(arch: &MlpArchitecture) -> usize {
    HEADER_BYTES + TRANSFORM_BYTES + 4 * arch.parameter_count()
}

/// A trained network together with the transform that maps original mesh
/// coordinates into the normalized space the network was fit in.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralImplicit {
    pub model: MlpModel,
    /// Row-major 3x4 affine, kept in its stored precision.
    pub affine: [f32; 12],
}

impl NeuralImplicit {
    pub fn new(model: MlpModel, transform: &NormalizationTransform) -> Self {
        let affine = transform.to_affine().map(|v| v as f32);
        Self { model, affine }
    }

    pub fn architecture(&self) -> MlpArchitecture {
        self.model.architecture()
    }

    pub fn transform(&self) -> Option<NormalizationTransform> {
        NormalizationTransform::from_affine(&self.affine.map(|v| v as f64))
    }

    /// Uniform scale of the stored affine.
    pub fn scale(&self) -> f64 {
        let m = self.affine.map(|v| v as f64);
        let det = m[0] * (m[5] * m[10] - m[6] * m[9]) - m[1] * (m[4] * m[10] - m[6] * m[8])
            + m[2] * (m[4] * m[9] - m[5] * m[8]);
        det.cbrt()
    }

    pub fn to_normalized(&self, p: &Vec3) -> Vec3 {
        let m = self.affine.map(|v| v as f64);
        Vec3::new(
            m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3],
            m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
            m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11],
        )
    }

    /// Field in normalized coordinates.
    pub fn field(&self) -> NeuralField {
        NeuralField::new(&self.model)
    }

    /// Signed distance in original mesh units.
    pub fn query_original(&self, p: &Vec3) -> f64 {
        self.model.forward_point(&self.to_normalized(p)) / self.scale()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture();
        let mut out = Vec::with_capacity(file_size(&arch));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(arch.hidden_layers as u16).to_le_bytes());
        out.extend_from_slice(&(arch.hidden_width as u16).to_le_bytes());
        out.push(ACTIVATION_RELU);
        out.push(ACTIVATION_TANH);
        for v in &self.affine {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in self.model.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 {
            let mut m = [0u8; 4];
            m[..bytes.len()].copy_from_slice(bytes);
            return Err(FormatError::BadMagic(m));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        if bytes.len() < HEADER_BYTES + TRANSFORM_BYTES {
            return Err(FormatError::TruncatedPayload {
                expected: HEADER_BYTES + TRANSFORM_BYTES,
                got: bytes.len(),
            });
        }
        if bytes[4] != VERSION {
            return Err(FormatError::UnsupportedVersion(bytes[4]));
        }
        let layers = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
        let width = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
        for code in [bytes[9], bytes[10]] {
            if code != 0 {
                return Err(FormatError::UnknownActivationCode(code));
            }
        }
        let arch = MlpArchitecture::new(layers, width).map_err(|e| FormatError::InvalidArchitecture(e.to_string()))?;
        let expected = file_size(&arch);
        if bytes.len() != expected {
            return Err(FormatError::TruncatedPayload {
                expected,
                got: bytes.len(),
            });
        }
        let floats = |range: std::ops::Range<usize>| {
            bytes[range]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f32>>()
        };
        let affine: [f32; 12] = floats(HEADER_BYTES..HEADER_BYTES + TRANSFORM_BYTES).try_into().unwrap();
        let params = floats(HEADER_BYTES + TRANSFORM_BYTES..expected);
        let model = MlpModel::from_parameters(arch, params).map_err(|e| FormatError::InvalidArchitecture(e.to_string()))?;
        Ok(Self { model, affine })
    }

    /// Writes to a sibling temporary file and renames it into place, so
    /// readers never observe a partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        let path = path.as_ref();
        let io = |source| FormatError::Io {
            path: path.display().to_string(),
            source,
        };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(io)?;
        }
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// A network ready for repeated evaluation: parameters are widened once.
#[derive(Debug, Clone)]
pub struct NeuralField {
    arch: MlpArchitecture,
    params: Vec<f64>,
}

impl NeuralField {
    pub fn new(model: &MlpModel) -> Self {
        Self {
            arch: model.architecture(),
            params: model.widened_parameters(),
        }
    }

    pub fn architecture(&self) -> MlpArchitecture {
        self.arch
    }
}

impl DistanceField for NeuralField {
    fn distance(&self, p: &Vec3) -> f64 {
        forward_with(&self.arch, &self.params, p, &mut Scratch::new(&self.arch))
    }

    fn distance_batch(&self, points: &[Vec3]) -> Vec<f64> {
        let mut scratch = Scratch::new(&self.arch);
        points
            .iter()
            .map(|p| forward_with(&self.arch, &self.params, p, &mut scratch))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_model;

    fn sample() -> NeuralImplicit {
        let t = NormalizationTransform {
            translation: Vec3::new(0.25, -1.0, 3.0),
            scale: 0.5,
        };
        NeuralImplicit::new(init_model(MlpArchitecture::default(), 3), &t)
    }

    #[test]
    fn base_file_size() {
        let ni = sample();
        assert_eq!(ni.to_bytes().len(), 30271);
        assert_eq!(file_size(&MlpArchitecture::new(1, 4).unwrap()), 143);
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[0..4], b"NIMP");
        assert_eq!(b[4], 1);
        assert_eq!(u16::from_le_bytes([b[5], b[6]]), 8);
        assert_eq!(u16::from_le_bytes([b[7], b[8]]), 32);
        assert_eq!((b[9], b[10]), (0, 0));
        assert_eq!(f32::from_le_bytes(b[11..15].try_into().unwrap()), 0.5);
        assert_eq!(f32::from_le_bytes(b[23..27].try_into().unwrap()), 0.125);
        assert_eq!(f32::from_le_bytes(b[39..43].try_into().unwrap()), -0.5);
    }

    #[test]
    fn byte_round_trip() {
        let ni = sample();
        let back = NeuralImplicit::from_bytes(&ni.to_bytes()).unwrap();
        assert_eq!(back, ni);
        let t = back.transform().unwrap();
        assert_eq!(t.scale, 0.5);
        assert_eq!(t.translation, Vec3::new(0.25, -1.0, 3.0));
    }

    #[test]
    fn rejects_damaged_files() {
        let b = sample().to_bytes();
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(NeuralImplicit::from_bytes(&bad), Err(FormatError::BadMagic(m)) if &m == b"XIMP"));
        assert!(matches!(
            NeuralImplicit::from_bytes(&b[..b.len() - 4]),
            Err(FormatError::TruncatedPayload { expected: 30271, got: 30267 })
        ));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(NeuralImplicit::from_bytes(&long), Err(FormatError::TruncatedPayload { .. })));
        let mut v = b.clone();
        v[4] = 2;
        assert!(matches!(NeuralImplicit::from_bytes(&v), Err(FormatError::UnsupportedVersion(2))));
        let mut a = b.clone();
        a[10] = 7;
        assert!(matches!(NeuralImplicit::from_bytes(&a), Err(FormatError::UnknownActivationCode(7))));
        assert!(matches!(NeuralImplicit::from_bytes(b"NI"), Err(FormatError::BadMagic(_))));
    }

    #[test]
    fn original_coordinates_divide_by_scale() {
        let ni = sample();
        let p = Vec3::new(0.1, 1.2, -2.9);
        let n = ni.to_normalized(&p);
        assert!((n - Vec3::new(0.175, 0.1, 0.05)).norm() < 1e-7);
        assert_eq!(ni.query_original(&p), ni.model.forward_point(&n) / 0.5);
    }

    #[test]
    fn field_batch_matches_single() {
        let f = sample().field();
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64 * 0.05, -0.3, 0.2)).collect();
        let batch = f.distance_batch(&pts);
        for (p, b) in pts.iter().zip(&batch) {
            assert_eq!(f.distance(p).to_bits(), b.to_bits());
        }
    }
}
