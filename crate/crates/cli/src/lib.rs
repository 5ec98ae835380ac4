//! The `ni` command line: convert meshes to neural implicits, render scenes,
//! evaluate fitted files, dump training samples and convert whole folders.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;

use neural_implicit::distance_field::MeshSdf;
use neural_implicit::eval::{compare_representations, evaluate_points, mean_abs, EvalReport};
use neural_implicit::format::{file_size, NeuralImplicit};
use neural_implicit::mesh::{load_mesh, Mesh, MeshError};
use neural_implicit::neural::{loss_l1, EpochRecord, NeuralError, LABEL_LIMIT};
use neural_implicit::pipeline::{convert_file, ConvertError};
use neural_implicit::render::{parse_scene, render, write_image, RayState, RenderError, SdfScene};
use neural_implicit::sampling::{build_training_set, save_sample_dump, SamplingError};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::WriteFailed { .. } => Self::internal(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<ConvertError> for CliError {
    fn from(e: ConvertError) -> Self {
        let input = match &e {
            ConvertError::Mesh(MeshError::WriteFailed { .. }) => false,
            ConvertError::Mesh(_) => true,
            ConvertError::Sampling(SamplingError::InvalidConfig(_) | SamplingError::MeshRequired(_)) => true,
            ConvertError::Neural(NeuralError::InvalidArchitecture(_) | NeuralError::InvalidConfig(_)) => true,
            _ => false,
        };
        if input {
            Self::input(e.to_string())
        } else {
            Self::internal(e.to_string())
        }
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::Io { .. } => Self::internal(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ni", version, about = "Overfit tiny networks to mesh signed distance fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert one mesh (OBJ or STL) into a .ni file and print its report
    Convert {
        mesh: PathBuf,
        /// Output path (default: the mesh path with a .ni extension)
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sphere-march a scene expression into a PPM image
    Render {
        /// e.g. union(ni("a.ni"), translate(0.3,0,0, sphere(0.2)))
        scene: String,
        #[arg(short, long, default_value = "render.ppm")]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Measure a .ni file against its source mesh and the grid baseline
    Eval {
        model: PathBuf,
        /// Source mesh in original units
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the labeled training samples for a mesh
    Sample {
        mesh: PathBuf,
        #[arg(short, long, default_value = "samples.nisa")]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Convert every OBJ/STL file in a directory
    Batch {
        dir: PathBuf,
        /// Output directory for .ni files and report.tsv
        #[arg(short, long)]
        output: PathBuf,
        /// Worker count
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress per-epoch progress lines
    #[arg(short, long)]
    quiet: bool,
    #[command(flatten)]
    flags: ConfigFlags,
}

/// One flag per configuration key.
#[derive(Debug, Args)]
struct ConfigFlags {
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    hidden_layers: Option<String>,
    #[arg(long)]
    hidden_width: Option<String>,
    #[arg(long)]
    padding: Option<String>,
    #[arg(long)]
    accuracy_beta: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    min_improvement: Option<String>,
    #[arg(long)]
    surface_samples: Option<String>,
    #[arg(long)]
    target_error: Option<String>,
    #[arg(long)]
    grid_resolution: Option<String>,
    #[arg(long)]
    image_width: Option<String>,
    #[arg(long)]
    image_height: Option<String>,
    #[arg(long)]
    fov: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eye: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    look_at: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    up: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    light: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    render_batch: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 29] {
        [
            ("seed", &self.seed),
            ("scale", &self.scale),
            ("hidden_layers", &self.hidden_layers),
            ("hidden_width", &self.hidden_width),
            ("padding", &self.padding),
            ("accuracy_beta", &self.accuracy_beta),
            ("strategy", &self.strategy),
            ("beta", &self.beta),
            ("sigma", &self.sigma),
            ("candidates", &self.candidates),
            ("subset", &self.subset),
            ("learning_rate", &self.learning_rate),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("min_improvement", &self.min_improvement),
            ("surface_samples", &self.surface_samples),
            ("target_error", &self.target_error),
            ("grid_resolution", &self.grid_resolution),
            ("image_width", &self.image_width),
            ("image_height", &self.image_height),
            ("fov", &self.fov),
            ("eye", &self.eye),
            ("look_at", &self.look_at),
            ("up", &self.up),
            ("light", &self.light),
            ("epsilon", &self.epsilon),
            ("max_steps", &self.max_steps),
            ("render_batch", &self.render_batch),
        ]
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        for (key, value) in self.flags.pairs() {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        Ok(c)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut command = Cli::command().after_long_help(config::help_table());
    for name in ["convert", "render", "eval", "sample", "batch"] {
        command = command.mut_subcommand(name, |c| c.after_long_help(config::help_table()));
    }
    let cli = match command.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Convert { mesh, output, common } => cmd_convert(mesh, output.as_deref(), common, out, err),
        Command::Render { scene, output, common } => cmd_render(scene, output, common, out),
        Command::Eval { model, mesh, common } => cmd_eval(model, mesh, common, out),
        Command::Sample { mesh, output, common } => cmd_sample(mesh, output, common, out),
        Command::Batch {
            dir,
            output,
            jobs,
            common,
        } => cmd_batch(dir, output, *jobs, common, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn epoch_line(r: &EpochRecord) -> String {
    format!("epoch={} loss={:.5} t={:.1}s", r.epoch, r.loss, r.seconds)
}

fn cmd_convert(mesh: &Path, output: Option<&Path>, common: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let rc = common.resolve()?;
    let cfg = rc.convert_config()?;
    let output = output.map(Path::to_path_buf).unwrap_or_else(|| mesh.with_extension("ni"));
    let quiet = common.quiet;
    let mut progress = |r: &EpochRecord| {
        if !quiet {
            let _ = writeln!(err, "{}", epoch_line(r));
        }
    };
    let conversion = convert_file(mesh, &output, &cfg, &mut progress)?;
    let _ = writeln!(out, "{} path={}", conversion.report, output.display());
    Ok(match rc.target_error {
        Some(t) if conversion.report.surface_error > t => EXIT_PARTIAL,
        _ => EXIT_OK,
    })
}

fn cmd_render(scene_text: &str, output: &Path, common: &Common, out: &mut dyn Write) -> Result<i32, CliError> {
    let rc = common.resolve()?;
    let scene: SdfScene = parse_scene(scene_text, Path::new(".")).map_err(|e| CliError::input(e.to_string()))?;
    let start = Instant::now();
    let result = render(&scene, &rc.camera()?, &rc.march_config()?, &rc.shading()?, rc.render_batch)?;
    write_image(&result.image, output)?;
    let hits = result.rays.count(RayState::Hit);
    let _ = writeln!(
        out,
        "hit_fraction={:.6} non_finite={} seconds={:.3} path={}",
        hits as f64 / result.rays.len() as f64,
        result.diagnostics.non_finite.len(),
        start.elapsed().as_secs_f64(),
        output.display()
    );
    Ok(EXIT_OK)
}

fn normalized_with(ni: &NeuralImplicit, mesh: &Mesh) -> Result<Mesh, CliError> {
    let vertices = mesh.vertices.iter().map(|v| ni.to_normalized(v)).collect();
    Ok(Mesh::new(vertices, mesh.triangles.clone(), mesh.source_path.clone())?)
}

fn cmd_eval(model: &Path, mesh_path: &Path, common: &Common, out: &mut dyn Write) -> Result<i32, CliError> {
    let rc = common.resolve()?;
    let cfg = rc.convert_config()?;
    let start = Instant::now();
    let ni = NeuralImplicit::load(model).map_err(|e| CliError::input(e.to_string()))?;
    let mesh = normalized_with(&ni, &load_mesh(mesh_path, None)?)?;
    let oracle = MeshSdf::with_accuracy(&mesh, cfg.accuracy_beta);
    let (cmp, _) = compare_representations(&mesh, &oracle, &ni.model, rc.grid_resolution, cfg.surface_samples, cfg.eval_seed)
        .map_err(|e| CliError::internal(e.to_string()))?;
    let samples = build_training_set(&oracle, Some(&mesh), &cfg.sampling).map_err(|e| CliError::internal(e.to_string()))?;
    let points: Vec<_> = samples.iter().map(|s| s.position).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.sdf.clamp(-LABEL_LIMIT, LABEL_LIMIT)).collect();
    let predictions = evaluate_points(&ni.field(), &points);
    let loss = loss_l1(&predictions, &targets).map_err(|e| CliError::internal(e.to_string()))?;
    let report = EvalReport {
        surface_error: cmp.neural_error,
        training_loss: loss,
        surface_sample_count: cfg.surface_samples,
        epochs_ran: 0,
        file_bytes: file_size(&ni.architecture()),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let _ = writeln!(out, "{report}");
    let _ = writeln!(
        out,
        "grid_resolution={} grid_error={:.6} grid_bytes={} neural_error={:.6} neural_bytes={} neural_better={}",
        rc.grid_resolution,
        cmp.grid_error,
        cmp.grid_bytes,
        cmp.neural_error,
        cmp.neural_bytes,
        cmp.neural_wins()
    );
    Ok(match rc.target_error {
        Some(t) if report.surface_error > t => EXIT_PARTIAL,
        _ => EXIT_OK,
    })
}

fn cmd_sample(mesh_path: &Path, output: &Path, common: &Common, out: &mut dyn Write) -> Result<i32, CliError> {
    let rc = common.resolve()?;
    let cfg = rc.convert_config()?;
    let mesh = load_mesh(mesh_path, None)?;
    let (normalized, _) = neural_implicit::mesh::normalize_to_unit_sphere(&mesh, cfg.padding)?;
    let oracle = MeshSdf::with_accuracy(&normalized, cfg.accuracy_beta);
    let samples = build_training_set(&oracle, Some(&normalized), &cfg.sampling).map_err(|e| CliError::from(ConvertError::from(e)))?;
    save_sample_dump(&samples, output).map_err(|e| CliError::internal(e.to_string()))?;
    let near = mean_abs(&samples.iter().map(|s| s.sdf).collect::<Vec<_>>());
    let _ = writeln!(
        out,
        "samples={} strategy={} mean_abs_sdf={:.6} path={}",
        samples.len(),
        cfg.sampling.strategy.name(),
        near,
        output.display()
    );
    Ok(EXIT_OK)
}

/// Mesh files of a corpus directory, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(format!("cannot read corpus {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("stl"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Linear-interpolated quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn cmd_batch(dir: &Path, output: &Path, jobs: usize, common: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let rc = common.resolve()?;
    let cfg = rc.convert_config()?;
    let files = corpus_files(dir)?;
    if files.is_empty() {
        return Err(CliError::input(format!("EmptyCorpus: no OBJ or STL files in {}", dir.display())));
    }
    if jobs == 0 {
        return Err(CliError::input("jobs must be at least 1"));
    }
    std::fs::create_dir_all(output).map_err(|e| CliError::internal(format!("cannot create {}: {e}", output.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    let log = Arc::new(std::sync::Mutex::new(Vec::<String>::new()));
    let results: Vec<(String, Result<EvalReport, CliError>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let target = output.join(Path::new(&name).with_extension("ni"));
                let result = convert_file(path, &target, &cfg, &mut |_: &EpochRecord| {})
                    .map(|c| c.report)
                    .map_err(CliError::from);
                let line = match &result {
                    Ok(r) => format!("done {name} surface_error={:.6}", r.surface_error),
                    Err(e) => format!("failed {name}: {}", e.message),
                };
                log.lock().expect("log lock").push(line);
                (name, result)
            })
            .collect()
    });
    if !common.quiet {
        for line in log.lock().expect("log lock").iter() {
            let _ = writeln!(err, "{line}");
        }
    }
    let mut table = format!("mesh\tstatus\t{}\n", EvalReport::TABLE_HEADER);
    let mut errors = Vec::new();
    for (name, result) in &results {
        match result {
            Ok(r) => {
                table.push_str(&format!("{name}\tok\t{}\n", r.table_row()));
                errors.push(r.surface_error);
            }
            Err(e) => table.push_str(&format!("{name}\tfailed: {}\n", e.message.replace(['\t', '\n'], " "))),
        }
    }
    std::fs::write(output.join("report.tsv"), &table).map_err(|e| CliError::internal(e.to_string()))?;
    let _ = write!(out, "{table}");
    let failed = results.len() - errors.len();
    if errors.is_empty() {
        let _ = writeln!(out, "converted=0 failed={failed}");
        return Err(CliError::input("every mesh in the corpus failed to convert"));
    }
    errors.sort_by(f64::total_cmp);
    let _ = writeln!(
        out,
        "converted={} failed={failed} surface_error_min={:.6} p25={:.6} median={:.6} p75={:.6} max={:.6}",
        errors.len(),
        errors[0],
        quantile(&errors, 0.25),
        quantile(&errors, 0.5),
        quantile(&errors, 0.75),
        errors[errors.len() - 1]
    );
    Ok(EXIT_OK)
}
