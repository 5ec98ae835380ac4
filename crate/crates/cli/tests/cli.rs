use std::path::{Path, PathBuf};
use std::process::Command;

use neural_implicit_cli::{run, EXIT_INPUT, EXIT_OK, EXIT_PARTIAL};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn ni(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ni").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

const QUICK: &[&str] = &["--scale", "0.002", "--hidden-layers", "2", "--hidden-width", "8", "--epochs", "3", "-q"];

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(QUICK.iter().copied()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn render_sphere_writes_a_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("s.ppm");
    let o = ni(&["render", "sphere(0.5)", "-o", s(&img), "--image-width", "32", "--image-height", "24"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let bytes = std::fs::read(&img).unwrap();
    assert!(bytes.starts_with(b"P6\n32 24\n255\n"));
    assert_eq!(bytes.len(), 13 + 32 * 24 * 3);
    let hit = field(&o.out, "hit_fraction");
    assert!(hit > 0.1 && hit < 0.6, "{hit}");
}

#[test]
fn scene_syntax_errors_report_the_offset() {
    let o = ni(&["render", "union("]);
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.err.contains("offset 6"), "{}", o.err);
    let o = ni(&["render", "blob(1)"]);
    assert_eq!(o.code, EXIT_INPUT);
}

#[test]
fn missing_mesh_is_an_input_error() {
    let o = ni(&["convert", "/nonexistent/mesh.obj"]);
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.err.contains("unreadable file"), "{}", o.err);
}

#[test]
fn bad_config_values_are_input_errors() {
    let o = ni(&["render", "sphere(0.5)", "--fov", "200"]);
    assert_eq!(o.code, EXIT_INPUT, "{}", o.err);
    let o = ni(&["convert", "x.obj", "--strategy", "magic"]);
    assert_eq!(o.code, EXIT_INPUT, "{}", o.err);
    let o = ni(&["frobnicate"]);
    assert_eq!(o.code, EXIT_INPUT);
}

#[test]
fn help_lists_configuration_keys() {
    let o = ni(&["convert", "--help"]);
    assert_eq!(o.code, EXIT_OK);
    for key in ["learning_rate", "render_batch", "accuracy_beta"] {
        assert!(o.out.contains(key), "{key}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small render\nimage_width = 8\nimage_height = 8\n").unwrap();
    let img = dir.path().join("a.ppm");
    let o = ni(&["render", "sphere(0.5)", "-o", s(&img), "--config", s(&cfg), "--image-width", "4"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert!(std::fs::read(&img).unwrap().starts_with(b"P6\n4 8\n255\n"));
}

#[test]
fn convert_then_eval_then_render() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("ico.ni");
    let mesh = assets().join("icosphere.obj");
    let o = ni(&with_quick(&["convert", s(&mesh), "-o", s(&model)]));
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert_eq!(field(&o.out, "epochs"), 3.0);
    assert_eq!(std::fs::metadata(&model).unwrap().len() as f64, field(&o.out, "bytes"));

    let o = ni(&with_quick(&["eval", s(&model), "--mesh", s(&mesh)]));
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert!(o.out.contains("neural_better="));
    assert!(field(&o.out, "grid_error") > 0.0);

    let scene = format!("difference(ni(\"{}\"), sphere(0.2))", s(&model));
    let img = dir.path().join("r.ppm");
    let o = ni(&["render", &scene, "-o", s(&img), "--image-width", "8", "--image-height", "8"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
}

#[test]
fn unmet_target_error_exits_partial() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("ico.ni");
    let mesh = assets().join("icosphere.obj");
    let mut args = with_quick(&["convert", s(&mesh), "-o", s(&model)]);
    args.extend(["--target-error", "1e-9"]);
    let o = ni(&args);
    assert_eq!(o.code, EXIT_PARTIAL, "{}", o.err);
    assert!(model.exists());
}

#[test]
fn sample_writes_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("t.nisa");
    let mesh = assets().join("torus.obj");
    let o = ni(&with_quick(&["sample", s(&mesh), "-o", s(&dump), "--strategy", "uniform"]));
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert_eq!(field(&o.out, "samples"), 2000.0);
    assert!(o.out.contains("strategy=uniform"));
    let samples = neural_implicit::sampling::read_sample_dump(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!(samples.len(), 2000);
}

#[test]
fn batch_isolates_a_corrupt_file() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    std::fs::copy(assets().join("icosphere.obj"), corpus.path().join("a.obj")).unwrap();
    std::fs::copy(assets().join("cube.stl"), corpus.path().join("b.stl")).unwrap();
    std::fs::write(corpus.path().join("c.obj"), "v 0 0 0\nf 1 9 3\n").unwrap();
    std::fs::write(corpus.path().join("notes.txt"), "ignored").unwrap();
    let o = ni(&with_quick(&["batch", s(corpus.path()), "-o", s(out.path()), "-j", "2"]));
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let report = std::fs::read_to_string(out.path().join("report.tsv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("a.obj\tok"));
    assert!(rows[2].starts_with("b.stl\tok"));
    assert!(rows[3].starts_with("c.obj\tfailed"));
    assert!(out.path().join("a.ni").exists() && out.path().join("b.ni").exists());
    assert!(!out.path().join("c.ni").exists());
    let summary = o.out.lines().last().unwrap();
    assert_eq!(field(summary, "converted"), 2.0);
    assert_eq!(field(summary, "failed"), 1.0);
}

#[test]
fn empty_corpus_is_an_input_error() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = ni(&["batch", s(corpus.path()), "-o", s(out.path())]);
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.err.contains("EmptyCorpus"), "{}", o.err);
}

#[test]
fn binary_exit_status_matches() {
    let status = Command::new(env!("CARGO_BIN_EXE_ni"))
        .args(["render", "union("])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&status.stderr).contains("offset 6"));
}
