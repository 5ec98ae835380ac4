use neural_implicit::field::DistanceField;
use neural_implicit::format::{FormatError, NeuralImplicit};
use neural_implicit::geom::Vec3;
use neural_implicit::mesh::NormalizationTransform;
use neural_implicit::neural::{MlpArchitecture, MlpModel};

const EXAMPLE_HEX: &str = "4e494d50010100010000000000003f00000000000000000000003f000000000000003f00000000000000000000000000\
                           0000000000003f000000000000003f000080be0000803f0000003e00000040000000bf";

fn example() -> NeuralImplicit {
    let arch = MlpArchitecture::new(1, 1).unwrap();
    let model = MlpModel::from_parameters(arch, vec![0.5, -0.25, 1.0, 0.125, 2.0, -0.5]).unwrap();
    let t = NormalizationTransform {
        translation: Vec3::new(1.0, 0.0, 0.0),
        scale: 0.5,
    };
    NeuralImplicit::new(model, &t)
}

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

#[test]
fn documented_example_is_bit_exact() {
    let bytes = example().to_bytes();
    assert_eq!(bytes.len(), 83);
    assert_eq!(bytes, unhex(EXAMPLE_HEX));
}

#[test]
fn documented_example_evaluates() {
    let ni = NeuralImplicit::from_bytes(&unhex(EXAMPLE_HEX)).unwrap();
    let p = Vec3::new(-0.6, 0.8, 1.2);
    let q = ni.to_normalized(&p);
    assert!((q - Vec3::new(0.2, 0.4, 0.6)).norm() < 1e-6);
    let y = ni.field().distance(&q);
    assert!((y - 0.95f64.tanh()).abs() < 1e-6, "{y}");
    assert!((ni.query_original(&p) - 0.95f64.tanh() / 0.5).abs() < 1e-5);
}

#[test]
fn every_truncation_is_rejected() {
    let bytes = unhex(EXAMPLE_HEX);
    for n in 0..bytes.len() {
        assert!(NeuralImplicit::from_bytes(&bytes[..n]).is_err(), "accepted {n} bytes");
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(NeuralImplicit::from_bytes(&long), Err(FormatError::TruncatedPayload { expected: 83, got: 84 })));
}

#[test]
fn header_damage_is_classified() {
    let good = unhex(EXAMPLE_HEX);
    let mut b = good.clone();
    b[0] = b'X';
    assert!(matches!(NeuralImplicit::from_bytes(&b), Err(FormatError::BadMagic(_))));
    let mut b = good.clone();
    b[4] = 2;
    assert!(matches!(NeuralImplicit::from_bytes(&b), Err(FormatError::UnsupportedVersion(2))));
    let mut b = good.clone();
    b[10] = 7;
    assert!(matches!(NeuralImplicit::from_bytes(&b), Err(FormatError::UnknownActivationCode(7))));
    let mut b = good;
    b[5] = 0;
    assert!(matches!(NeuralImplicit::from_bytes(&b), Err(FormatError::InvalidArchitecture(_))));
}
