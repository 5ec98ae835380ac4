//! Regenerates the bundled test meshes under `assets/`.

use std::path::Path;

use neural_implicit::geom::Vec3;
use neural_implicit::mesh::{shapes, write_obj, write_stl_binary};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets");
    std::fs::create_dir_all(&dir).expect("create assets dir");
    write_obj(&shapes::icosphere(3, 1.0), dir.join("icosphere.obj")).unwrap();
    write_obj(&shapes::torus(0.6, 0.15, 64, 32), dir.join("torus.obj")).unwrap();
    write_stl_binary(&shapes::cube(Vec3::zeros(), 0.5), dir.join("cube.stl")).unwrap();
    write_obj(&shapes::quad_shell(0.5), dir.join("quad_shell.obj")).unwrap();
    println!("wrote assets to {}", dir.display());
}
