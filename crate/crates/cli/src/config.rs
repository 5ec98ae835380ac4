//! Flat `key = value` run configuration shared by every subcommand.

use std::path::Path;

use neural_implicit::geom::Vec3;
use neural_implicit::neural::MlpArchitecture;
use neural_implicit::pipeline::ConvertConfig;
use neural_implicit::render::{Camera, MarchConfig, Shading};
use neural_implicit::sampling::SamplingStrategy;

use crate::CliError;

/// Every configurable key, its default, and what it controls. Each key is
/// also a `--kebab-case` flag.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "42", "seed for sampling, initialization, shuffling and evaluation"),
    ("scale", "0.01", "multiplies candidate, subset and surface-sample counts (1.0 = full size)"),
    ("hidden_layers", "8", "hidden layer count"),
    ("hidden_width", "32", "hidden layer width"),
    ("padding", "0.1", "gap left between the normalized mesh and the unit sphere"),
    ("accuracy_beta", "2.0", "fast winding number accuracy parameter"),
    ("strategy", "importance", "importance | uniform | vertex_gaussian | surface_gaussian"),
    ("beta", "30", "importance sampling sharpness"),
    ("sigma", "-", "Gaussian sampler spread (0.1 vertex, 0.01 surface)"),
    ("candidates", "-", "candidate pool size (default 10^7 * scale)"),
    ("subset", "-", "training set size (default 10^6 * scale)"),
    ("learning_rate", "1e-4", "Adam learning rate"),
    ("epochs", "100", "maximum training epochs"),
    ("batch_size", "64", "training mini-batch size"),
    ("patience", "5", "early stopping patience in epochs"),
    ("min_improvement", "1e-3", "relative improvement that resets patience"),
    ("surface_samples", "-", "surface samples for error reporting (default 10^5 * scale)"),
    ("target_error", "-", "surface error above which convert exits with status 1"),
    ("grid_resolution", "20", "baseline grid resolution for eval"),
    ("image_width", "256", "rendered image width"),
    ("image_height", "256", "rendered image height"),
    ("fov", "45", "vertical field of view in degrees"),
    ("eye", "0,0,-2", "camera position"),
    ("look_at", "0,0,0", "camera target"),
    ("up", "0,1,0", "camera up vector"),
    ("light", "-1,1,-1", "direction towards the light"),
    ("epsilon", "1e-3", "sphere marching hit threshold"),
    ("max_steps", "200", "sphere marching step limit"),
    ("render_batch", "all", "points per evaluation batch while marching (number or all)"),
];

pub fn help_table() -> String {
    let mut s = String::from("Configuration (config file key = flag --key-with-dashes):\n");
    for (k, d, what) in KEYS {
        s.push_str(&format!("  {k:<16} default {d:<10} {what}\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub padding: f64,
    pub accuracy_beta: f64,
    pub strategy: String,
    pub beta: f64,
    pub sigma: Option<f64>,
    pub candidates: Option<usize>,
    pub subset: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub surface_samples: Option<usize>,
    pub target_error: Option<f64>,
    pub grid_resolution: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub fov: f64,
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub light: Vec3,
    pub epsilon: f64,
    pub max_steps: usize,
    pub render_batch: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut c = Self {
            seed: 0,
            scale: 0.0,
            hidden_layers: 0,
            hidden_width: 0,
            padding: 0.0,
            accuracy_beta: 0.0,
            strategy: String::new(),
            beta: 0.0,
            sigma: None,
            candidates: None,
            subset: None,
            learning_rate: 0.0,
            epochs: 0,
            batch_size: 0,
            patience: 0,
            min_improvement: 0.0,
            surface_samples: None,
            target_error: None,
            grid_resolution: 0,
            image_width: 0,
            image_height: 0,
            fov: 0.0,
            eye: Vec3::zeros(),
            look_at: Vec3::zeros(),
            up: Vec3::zeros(),
            light: Vec3::zeros(),
            epsilon: 0.0,
            max_steps: 0,
            render_batch: None,
        };
        for (k, d, _) in KEYS {
            if *d != "-" {
                c.set(k, d).expect("defaults parse");
            }
        }
        c
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("config {key}: cannot parse '{value}'")))
}

fn parse_vec(key: &str, value: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::input(format!("config {key}: expected x,y,z, got '{value}'")));
    }
    Ok(Vec3::new(parse(key, parts[0])?, parse(key, parts[1])?, parse(key, parts[2])?))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "scale" => self.scale = parse(key, v)?,
            "hidden_layers" => self.hidden_layers = parse(key, v)?,
            "hidden_width" => self.hidden_width = parse(key, v)?,
            "padding" => self.padding = parse(key, v)?,
            "accuracy_beta" => self.accuracy_beta = parse(key, v)?,
            "strategy" => {
                if !matches!(v, "importance" | "uniform" | "vertex_gaussian" | "surface_gaussian") {
                    return Err(CliError::input(format!("config strategy: unknown strategy '{v}'")));
                }
                self.strategy = v.to_string();
            }
            "beta" => self.beta = parse(key, v)?,
            "sigma" => self.sigma = Some(parse(key, v)?),
            "candidates" => self.candidates = Some(parse(key, v)?),
            "subset" => self.subset = Some(parse(key, v)?),
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "min_improvement" => self.min_improvement = parse(key, v)?,
            "surface_samples" => self.surface_samples = Some(parse(key, v)?),
            "target_error" => self.target_error = Some(parse(key, v)?),
            "grid_resolution" => self.grid_resolution = parse(key, v)?,
            "image_width" => self.image_width = parse(key, v)?,
            "image_height" => self.image_height = parse(key, v)?,
            "fov" => self.fov = parse(key, v)?,
            "eye" => self.eye = parse_vec(key, v)?,
            "look_at" => self.look_at = parse_vec(key, v)?,
            "up" => self.up = parse_vec(key, v)?,
            "light" => self.light = parse_vec(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "max_steps" => self.max_steps = parse(key, v)?,
            "render_batch" => self.render_batch = if v == "all" { None } else { Some(parse(key, v)?) },
            _ => return Err(CliError::input(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("{source}:{}: expected key = value", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| CliError::input(format!("{source}:{}: {}", n + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn architecture(&self) -> Result<MlpArchitecture, CliError> {
        MlpArchitecture::new(self.hidden_layers, self.hidden_width).map_err(|e| CliError::input(e.to_string()))
    }

    pub fn convert_config(&self) -> Result<ConvertConfig, CliError> {
        if !(self.scale > 0.0) {
            return Err(CliError::input("scale must be positive"));
        }
        let mut c = ConvertConfig::scaled(self.scale, self.seed);
        c.architecture = self.architecture()?;
        c.padding = self.padding;
        c.accuracy_beta = self.accuracy_beta;
        c.sampling.beta = self.beta;
        c.sampling.strategy = match self.strategy.as_str() {
            "uniform" => SamplingStrategy::Uniform,
            "vertex_gaussian" => SamplingStrategy::VertexGaussian {
                sigma: self.sigma.unwrap_or(0.1),
            },
            "surface_gaussian" => SamplingStrategy::SurfaceGaussian {
                sigma: self.sigma.unwrap_or(0.01),
            },
            _ => SamplingStrategy::Importance,
        };
        if let Some(n) = self.candidates {
            c.sampling.candidate_count = n;
        }
        if let Some(m) = self.subset {
            c.sampling.subset_count = m;
        }
        c.train.learning_rate = self.learning_rate;
        c.train.max_epochs = self.epochs;
        c.train.batch_size = self.batch_size;
        c.train.patience = self.patience;
        c.train.min_relative_improvement = self.min_improvement;
        if let Some(s) = self.surface_samples {
            c.surface_samples = s;
        }
        c.sampling.validate().map_err(|e| CliError::input(e.to_string()))?;
        c.train.validate().map_err(|e| CliError::input(e.to_string()))?;
        if c.surface_samples == 0 {
            return Err(CliError::input("surface_samples must be positive"));
        }
        Ok(c)
    }

    pub fn camera(&self) -> Result<Camera, CliError> {
        Camera::new(self.eye, self.look_at, self.up, self.fov, self.image_width, self.image_height)
            .map_err(|e| CliError::input(e.to_string()))
    }

    pub fn march_config(&self) -> Result<MarchConfig, CliError> {
        let c = MarchConfig {
            max_steps: self.max_steps,
            ..MarchConfig::with_epsilon(self.epsilon)
        };
        c.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(c)
    }

    pub fn shading(&self) -> Result<Shading, CliError> {
        if self.light.norm() == 0.0 {
            return Err(CliError::input("light direction must be nonzero"));
        }
        Ok(Shading {
            light: self.light.normalize(),
            ..Shading::default()
        })
    }
}
