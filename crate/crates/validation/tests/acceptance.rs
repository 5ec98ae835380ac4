//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (uncaptured, so it shows up in normal `cargo test` output) and then
//! asserts on the same verdict.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neural_implicit::distance_field::{winding_number_exact, MeshSdf, DEFAULT_ACCURACY_BETA};
use neural_implicit::eval::{compare_representations, evaluate_points, mean_abs, BASELINE_GRID_RESOLUTION};
use neural_implicit::field::{DistanceField, SphereField};
use neural_implicit::format::{NeuralField, NeuralImplicit};
use neural_implicit::geom::Vec3;
use neural_implicit::mesh::{load_mesh, normalize_to_unit_sphere, shapes, NormalizationTransform, DEFAULT_PADDING};
use neural_implicit::neural::{forward_with, init_model, loss_and_gradient, train, EpochRecord, MlpArchitecture, Scratch, TrainConfig};
use neural_implicit::pipeline::{convert_mesh, ConvertConfig};
use neural_implicit::render::{init_rays, march, render, Camera, FieldSink, MarchConfig, RayBuffer, RayState, SdfScene, Shading};
use neural_implicit::sampling::{build_training_set, importance_weight, SamplingConfig, SamplingStrategy};
use neural_implicit_cli::{run, EXIT_OK};

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn cube_points(count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Golden-angle spiral points on a sphere.
fn fibonacci_sphere(count: usize, radius: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("ni").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

#[test]
fn criterion_01_parameter_count() {
    let n = MlpArchitecture::new(8, 32).unwrap().parameter_count();
    verdict(1, "parameter count", n == 7553, format!("8x32 network has {n} parameters, expected 7553"));
}

#[test]
fn criterion_02_importance_weight() {
    let w = importance_weight(5.0 / 3.0, 30.0);
    let rel = (w - 1.92e-22).abs() / 1.92e-22;
    verdict(2, "importance weight", rel < 0.01, format!("w(5/3, 30) = {w:.4e}, relative error {rel:.2e} (limit 1e-2)"));
}

#[test]
fn criterion_03_winding_sign() {
    let r = 0.5;
    let mesh = shapes::icosphere(2, r);
    let sdf = MeshSdf::new(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut tested, mut agree) = (0, 0);
    while tested < 10_000 {
        let q = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let analytic = q.norm() - r;
        if analytic.abs() < 0.01 {
            continue;
        }
        tested += 1;
        if (sdf.signed_distance(&q) < 0.0) == (analytic < 0.0) {
            agree += 1;
        }
    }
    verdict(3, "winding-number sign", agree == tested, format!("{agree}/{tested} signs agree outside the 0.01 band"));
}

#[test]
fn criterion_04_fast_winding_accuracy() {
    let mesh = shapes::icosphere(2, 0.5);
    let sdf = MeshSdf::with_accuracy(&mesh, DEFAULT_ACCURACY_BETA);
    let worst = cube_points(1000, 4)
        .iter()
        .map(|q| (sdf.winding_number(q).unwrap() - winding_number_exact(&mesh, q).unwrap()).abs())
        .fold(0.0, f64::max);
    verdict(
        4,
        "fast winding accuracy",
        worst < 1e-3,
        format!("max |fast - exact| = {worst:.3e} over 1000 queries at beta {DEFAULT_ACCURACY_BETA} (limit 1e-3)"),
    );
}

fn mean_l1(arch: &MlpArchitecture, params: &[f64], xs: &[Vec3], ys: &[f64]) -> f64 {
    let mut scratch = Scratch::new(arch);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (forward_with(arch, params, x, &mut scratch) - y).abs())
        .sum::<f64>()
        / xs.len() as f64
}

#[test]
fn criterion_05_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for a in 0..5 {
        let arch = MlpArchitecture::new(rng.random_range(1..=3), rng.random_range(2..=8)).unwrap();
        // zero initial biases put whole layers exactly on the ReLU kink
        let params: Vec<f64> = init_model(arch, 100 + a)
            .widened_parameters()
            .iter()
            .map(|p| p + rng.random_range(-0.1..0.1))
            .collect();
        for _ in 0..3 {
            let n = rng.random_range(1..=8);
            let xs: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
            let mut grad = vec![0.0; params.len()];
            loss_and_gradient(&arch, &params, &xs, &ys, &mut grad).unwrap();
            let h = 1e-6;
            let mut probe = params.clone();
            for i in 0..params.len() {
                if grad[i].abs() <= 1e-8 {
                    continue;
                }
                probe[i] = params[i] + h;
                let up = mean_l1(&arch, &probe, &xs, &ys);
                probe[i] = params[i] - h;
                let down = mean_l1(&arch, &probe, &xs, &ys);
                probe[i] = params[i];
                let fd = (up - down) / (2.0 * h);
                worst = worst.max((grad[i] - fd).abs() / grad[i].abs());
                checked += 1;
            }
        }
    }
    verdict(
        5,
        "gradient check",
        worst < 1e-4,
        format!("max relative error {worst:.2e} over {checked} gradient entries, 5 architectures x 3 batches (limit 1e-4)"),
    );
}

#[test]
fn criterion_06_sphere_convergence() {
    let oracle = SphereField::new(0.5);
    let sampling = SamplingConfig::default();
    let samples = build_training_set(&oracle, None, &sampling).unwrap();
    let cfg = TrainConfig::default();
    let outcome = train(init_model(MlpArchitecture::default(), cfg.seed), &samples, &cfg, &mut |_: &EpochRecord| {}).unwrap();
    let points = fibonacci_sphere(10_000, 0.5);
    let err = mean_abs(&evaluate_points(&NeuralField::new(&outcome.model), &points));
    verdict(
        6,
        "sphere convergence",
        err < 0.003 && outcome.epochs_ran() <= 100,
        format!("surface error {err:.5} after {} epochs on {} samples (limit 0.003)", outcome.epochs_ran(), samples.len()),
    );
}

fn epochs_to_loss(history: &[EpochRecord], threshold: f64) -> Option<usize> {
    history.iter().position(|r| r.loss < threshold).map(|i| i + 1)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_07_importance_beats_uniform() {
    let mesh = load_mesh(assets().join("icosphere.obj"), None).unwrap();
    let (normalized, _) = normalize_to_unit_sphere(&mesh, DEFAULT_PADDING).unwrap();
    let oracle = MeshSdf::new(&normalized);
    let mut importance = Vec::new();
    let mut uniform = Vec::new();
    for seed in 1..=3u64 {
        for (strategy, sink) in [(SamplingStrategy::Importance, &mut importance), (SamplingStrategy::Uniform, &mut uniform)] {
            let sampling = SamplingConfig {
                strategy,
                seed,
                ..SamplingConfig::default()
            };
            let samples = build_training_set(&oracle, Some(&normalized), &sampling).unwrap();
            let cfg = TrainConfig { seed, ..TrainConfig::default() };
            let outcome = train(init_model(MlpArchitecture::default(), seed), &samples, &cfg, &mut |_: &EpochRecord| {}).unwrap();
            sink.push(epochs_to_loss(&outcome.history, 0.005).map_or(f64::INFINITY, |e| e as f64));
        }
    }
    let (mi, mu) = (median(importance.clone()), median(uniform.clone()));
    verdict(
        7,
        "importance vs uniform sampling",
        mi < mu,
        format!("epochs to loss 0.005 over seeds 1-3: importance {importance:?} (median {mi}), uniform {uniform:?} (median {mu})"),
    );
}

#[test]
fn criterion_08_format_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ni");
    let transform = NormalizationTransform {
        translation: Vec3::new(0.25, -1.5, 3.0),
        scale: 0.375,
    };
    let original = NeuralImplicit::new(init_model(MlpArchitecture::default(), 8), &transform);
    original.save(&path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len();
    let loaded = NeuralImplicit::load(&path).unwrap();
    let (a, b) = (original.field(), loaded.field());
    let points = cube_points(1000, 8);
    let identical = points.iter().all(|p| {
        a.distance(p).to_bits() == b.distance(p).to_bits() && original.query_original(p).to_bits() == loaded.query_original(p).to_bits()
    });
    verdict(
        8,
        "format round trip",
        identical && size == 30271,
        format!("bitwise identical on 1000 points: {identical}; file size {size} bytes (expected 30271)"),
    );
}

#[test]
fn criterion_09_renderer() {
    let eps = MarchConfig::default().epsilon;
    let cfg = MarchConfig::default();
    let sphere = SphereField::new(0.5);
    let camera = Camera::new(Vec3::new(0.0, 0.0, -2.0), Vec3::zeros(), Vec3::y(), 45.0, 64, 64).unwrap();

    let mut center = RayBuffer {
        width: 1,
        height: 1,
        origin: vec![camera.eye],
        direction: vec![camera.direction(32.0, 32.0)],
        t: vec![1.0],
        t_exit: vec![3.0],
        steps: vec![0],
        state: vec![RayState::Active],
    };
    march(&mut center, &cfg, &mut FieldSink::new(&sphere, None));
    let depth = center.t[0];
    let depth_ok = center.state[0] == RayState::Hit && (depth - 1.5).abs() <= eps;

    let shading = Shading::default();
    let runs: Vec<_> = [Some(1), Some(64), None]
        .into_iter()
        .map(|b| render(&sphere, &camera, &cfg, &shading, b).unwrap())
        .collect();
    let hits = |r: &neural_implicit::render::RenderOutput| -> Vec<bool> { r.rays.state.iter().map(|s| *s == RayState::Hit).collect() };
    let same_hits = runs.iter().all(|r| hits(r) == hits(&runs[0]));
    let hit_count = runs[0].rays.count(RayState::Hit);

    let again = render(&sphere, &camera, &cfg, &shading, None).unwrap();
    let stable = again.image.to_ppm() == runs[2].image.to_ppm() && runs.iter().all(|r| r.image == runs[0].image);
    let rays = init_rays(&camera);
    verdict(
        9,
        "renderer",
        depth_ok && same_hits && stable && rays.len() == 4096,
        format!(
            "center depth {depth:.6} (1.5 +/- {eps}); {hit_count} hit pixels identical across batch sizes 1/64/all: {same_hits}; PPM stable: {stable}"
        ),
    );
}

#[test]
fn criterion_10_neural_beats_grid() {
    let mut lines = Vec::new();
    let mut all = true;
    for name in ["torus.obj", "icosphere.obj"] {
        let mesh = load_mesh(assets().join(name), None).unwrap();
        let cfg = ConvertConfig::scaled(0.1, 42);
        let conv = convert_mesh(&mesh, &cfg, &mut |_: &EpochRecord| {}).unwrap();
        let oracle = MeshSdf::with_accuracy(&conv.normalized, cfg.accuracy_beta);
        let (c, _) = compare_representations(
            &conv.normalized,
            &oracle,
            &conv.implicit.model,
            BASELINE_GRID_RESOLUTION,
            cfg.surface_samples,
            cfg.eval_seed,
        )
        .unwrap();
        all &= c.neural_wins();
        lines.push(format!(
            "{name} neural {:.5} ({} B) vs grid {:.5} ({} B)",
            c.neural_error, c.neural_bytes, c.grid_error, c.grid_bytes
        ));
    }
    verdict(10, "neural vs 20^3 grid", all, lines.join("; "));
}

#[test]
fn criterion_11_csg_identities() {
    let net = NeuralField::new(&init_model(MlpArchitecture::new(2, 8).unwrap(), 11));
    let a = SdfScene::union(
        SdfScene::sphere(0.4).translate(Vec3::new(0.2, 0.0, -0.1)),
        SdfScene::neural(net).rotate(Vec3::new(1.0, 1.0, 0.0), 30.0).unwrap(),
    );
    let b = SdfScene::cuboid(Vec3::new(0.3, 0.5, 0.2)).translate(Vec3::new(-0.1, 0.1, 0.0));
    let union = SdfScene::union(a.clone(), a.clone());
    let ab = SdfScene::intersection(a.clone(), b.clone());
    let ba = SdfScene::intersection(b.clone(), a.clone());
    let diff = SdfScene::difference(a.clone(), SdfScene::Empty);
    let mut worst: [f64; 3] = [0.0; 3];
    for q in cube_points(1000, 11) {
        let va = a.evaluate(&q);
        worst[0] = worst[0].max((union.evaluate(&q) - va).abs());
        worst[1] = worst[1].max((ab.evaluate(&q) - ba.evaluate(&q)).abs());
        worst[2] = worst[2].max((diff.evaluate(&q) - va).abs());
    }
    verdict(
        11,
        "CSG identities",
        worst.iter().all(|w| *w <= 1e-12),
        format!(
            "max deviation union(a,a)-a {:.1e}, intersection swap {:.1e}, difference(a,empty)-a {:.1e} over 1000 points (limit 1e-12)",
            worst[0], worst[1], worst[2]
        ),
    );
}

fn without_seconds(report: &str) -> String {
    report
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split('\t').collect();
            if cols.len() > 2 {
                cols.pop();
            }
            cols.join("\t")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn same_files(a: &Path, b: &Path, name: &str) -> bool {
    std::fs::read(a.join(name)).ok() == std::fs::read(b.join(name)).ok()
}

#[test]
fn criterion_12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mesh = assets().join("torus.obj");
    let (first, second) = (d.join("first.ni"), d.join("second.ni"));
    let c1 = cli(&["convert", mesh.to_str().unwrap(), "-o", first.to_str().unwrap(), "-q"]);
    let c2 = cli(&["convert", mesh.to_str().unwrap(), "-o", second.to_str().unwrap(), "-q"]);
    let convert_same = c1.0 == EXIT_OK && c2.0 == EXIT_OK && std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap();

    let corpus = d.join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    let names = ["icosphere.obj", "torus.obj", "cube.stl", "quad_shell.obj"];
    for n in names {
        std::fs::copy(assets().join(n), corpus.join(n)).unwrap();
    }
    let (one, four) = (d.join("j1"), d.join("j4"));
    let b1 = cli(&["batch", corpus.to_str().unwrap(), "-o", one.to_str().unwrap(), "-j", "1", "-q"]);
    let b4 = cli(&["batch", corpus.to_str().unwrap(), "-o", four.to_str().unwrap(), "-j", "4", "-q"]);
    let models_same = names
        .iter()
        .all(|n| same_files(&one, &four, Path::new(n).with_extension("ni").to_str().unwrap()));
    let reports_same = without_seconds(&std::fs::read_to_string(one.join("report.tsv")).unwrap())
        == without_seconds(&std::fs::read_to_string(four.join("report.tsv")).unwrap());
    let batch_same = b1.0 == EXIT_OK && b4.0 == EXIT_OK && models_same && reports_same;
    verdict(
        12,
        "end-to-end determinism",
        convert_same && batch_same,
        format!(
            "two converts bitwise equal: {convert_same}; batch -j 1 vs -j 4 models equal: {models_same}, reports equal: {reports_same}{}",
            if c1.0 != EXIT_OK || b1.0 != EXIT_OK { format!(" ({}{})", c1.2, b1.2) } else { String::new() }
        ),
    );
}
