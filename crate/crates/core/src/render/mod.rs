//! Sphere-marching renderer over any [`DistanceField`].
//!
//! Rays start at their entry into the unit sphere. Each iteration gathers the
//! positions of all still-active rays into one dense batch, hands it to a
//! [`BatchSink`] for evaluation and advances every ray by its distance.

mod parse;
mod scene;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use parse::{parse_scene, parse_scene_expr, SceneError, SceneExpr};
pub use scene::SdfScene;

use crate::field::DistanceField;
use crate::geom::Vec3;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid march config: {0}")]
    InvalidConfig(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_degrees: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(eye: Vec3, look_at: Vec3, up: Vec3, fov_degrees: f64, width: usize, height: usize) -> Result<Self, RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidCamera(m.to_string()));
        if (look_at - eye).norm() == 0.0 {
            return bad("eye and look_at coincide");
        }
        if !(fov_degrees > 0.0 && fov_degrees < 180.0) {
            return bad("field of view must lie in (0, 180) degrees");
        }
        if width == 0 || height == 0 {
            return bad("image dimensions must be at least 1");
        }
        if (look_at - eye).cross(&up).norm() < 1e-12 {
            return bad("up vector is parallel to the view direction");
        }
        Ok(Self {
            eye,
            look_at,
            up,
            fov_degrees,
            width,
            height,
        })
    }

    /// Unit direction through the image-plane point `(x, y)` in pixel units,
    /// `(0, 0)` being the top-left corner.
    pub fn direction(&self, x: f64, y: f64) -> Vec3 {
        let forward = (self.look_at - self.eye).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        let half = (self.fov_degrees.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let u = (2.0 * x / self.width as f64 - 1.0) * half * aspect;
        let v = (1.0 - 2.0 * y / self.height as f64) * half;
        (forward + right * u + up * v).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchConfig {
    pub epsilon: f64,
    pub max_steps: usize,
    /// Finite-difference step for normals.
    pub normal_h: f64,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self::with_epsilon(1e-3)
    }
}

impl MarchConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_steps: 200,
            normal_h: 2.0 * epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.epsilon > 0.0) {
            return Err(RenderError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(RenderError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.normal_h > 0.0) {
            return Err(RenderError::InvalidConfig("normal step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RayState {
    Active,
    Hit,
    Miss,
}

/// Per-pixel ray state, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBuffer {
    pub width: usize,
    pub height: usize,
    pub origin: Vec<Vec3>,
    pub direction: Vec<Vec3>,
    pub t: Vec<f64>,
    /// Depth at which the ray leaves the unit sphere.
    pub t_exit: Vec<f64>,
    pub steps: Vec<usize>,
    pub state: Vec<RayState>,
}

impl RayBuffer {
    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.origin[i] + self.direction[i] * self.t[i]
    }

    pub fn count(&self, state: RayState) -> usize {
        self.state.iter().filter(|&&s| s == state).count()
    }
}

/// Pinhole rays through pixel centers, clipped to the unit sphere.
pub fn init_rays(camera: &Camera) -> RayBuffer {
    let n = camera.width * camera.height;
    let mut rays = RayBuffer {
        width: camera.width,
        height: camera.height,
        origin: vec![camera.eye; n],
        direction: Vec::with_capacity(n),
        t: vec![0.0; n],
        t_exit: vec![0.0; n],
        steps: vec![0; n],
        state: vec![RayState::Miss; n],
    };
    for j in 0..camera.height {
        for i in 0..camera.width {
            let k = j * camera.width + i;
            let d = camera.direction(i as f64 + 0.5, j as f64 + 0.5);
            rays.direction.push(d);
            let o = camera.eye;
            let b = o.dot(&d);
            let disc = b * b - (o.dot(&o) - 1.0);
            if disc < 0.0 {
                continue;
            }
            let root = disc.sqrt();
            let (near, far) = (-b - root, -b + root);
            if far < 0.0 {
                continue;
            }
            rays.t[k] = near.max(0.0);
            rays.t_exit[k] = far;
            rays.state[k] = RayState::Active;
        }
    }
    rays
}

/// Evaluates dense batches of query points.
pub trait BatchSink {
    fn evaluate(&mut self, points: &[Vec3], out: &mut Vec<f64>);
}

/// Feeds a field in chunks of at most `batch_size` points (`None` = all).
pub struct FieldSink<'a> {
    pub field: &'a dyn DistanceField,
    pub batch_size: Option<usize>,
    pub batches: usize,
    pub evaluations: usize,
}

impl<'a> FieldSink<'a> {
    pub fn new(field: &'a dyn DistanceField, batch_size: Option<usize>) -> Self {
        Self {
            field,
            batch_size,
            batches: 0,
            evaluations: 0,
        }
    }
}

impl BatchSink for FieldSink<'_> {
    fn evaluate(&mut self, points: &[Vec3], out: &mut Vec<f64>) {
        out.clear();
        if points.is_empty() {
            return;
        }
        let size = self.batch_size.unwrap_or(points.len()).max(1);
        for chunk in points.chunks(size) {
            out.extend(self.field.distance_batch(chunk));
            self.batches += 1;
        }
        self.evaluations += points.len();
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarchDiagnostics {
    pub iterations: usize,
    /// Pixels whose distance came back NaN; they are marked as misses.
    pub non_finite: Vec<usize>,
}

/// Sphere marching until every ray has hit or missed.
pub fn march(rays: &mut RayBuffer, config: &MarchConfig, sink: &mut dyn BatchSink) -> MarchDiagnostics {
    let mut diag = MarchDiagnostics::default();
    let mut active: Vec<usize> = (0..rays.len()).filter(|&i| rays.state[i] == RayState::Active).collect();
    let mut points = Vec::with_capacity(active.len());
    let mut values = Vec::with_capacity(active.len());
    while !active.is_empty() {
        diag.iterations += 1;
        points.clear();
        points.extend(active.iter().map(|&i| rays.position(i)));
        sink.evaluate(&points, &mut values);
        for (&i, &d) in active.iter().zip(&values) {
            if d.is_nan() {
                rays.state[i] = RayState::Miss;
                diag.non_finite.push(i);
            } else if d < config.epsilon {
                rays.state[i] = RayState::Hit;
            } else {
                rays.t[i] += d;
                rays.steps[i] += 1;
                if rays.steps[i] >= config.max_steps || rays.t[i] > rays.t_exit[i] + config.epsilon {
                    rays.state[i] = RayState::Miss;
                }
            }
        }
        active.retain(|&i| rays.state[i] == RayState::Active);
    }
    diag.non_finite.sort_unstable();
    diag
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shading {
    /// Unit direction towards the light.
    pub light: Vec3,
    pub albedo: [f64; 3],
    pub ambient: f64,
    pub background: [u8; 3],
}

impl Default for Shading {
    fn default() -> Self {
        Self {
            light: Vec3::new(-1.0, 1.0, -1.0).normalize(),
            albedo: [0.8, 0.8, 0.8],
            ambient: 0.1,
            background: [0, 0, 0],
        }
    }
}

/// RGB image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let path = path.as_ref();
    let io = |source| RenderError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&image.to_ppm()).map_err(io)
}

fn to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Normal at each hit pixel from central differences (six extra evaluations
/// per hit, sent through the same sink). `None` marks a degenerate gradient.
pub fn hit_normals(rays: &RayBuffer, config: &MarchConfig, sink: &mut dyn BatchSink) -> Vec<(usize, Option<Vec3>)> {
    let hits: Vec<usize> = (0..rays.len()).filter(|&i| rays.state[i] == RayState::Hit).collect();
    let h = config.normal_h;
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let mut points = Vec::with_capacity(hits.len() * 6);
    for &i in &hits {
        let p = rays.position(i);
        for a in &axes {
            points.push(p + a * h);
            points.push(p - a * h);
        }
    }
    let mut values = Vec::new();
    sink.evaluate(&points, &mut values);
    hits.iter()
        .enumerate()
        .map(|(k, &i)| {
            let v = &values[k * 6..k * 6 + 6];
            let g = Vec3::new(v[0] - v[1], v[2] - v[3], v[4] - v[5]) / (2.0 * h);
            let n = g.norm();
            (i, (n >= 1e-12 && n.is_finite()).then(|| g / n))
        })
        .collect()
}

/// Lambertian shading of marched rays; misses get the background color.
pub fn shade(rays: &RayBuffer, shading: &Shading, config: &MarchConfig, sink: &mut dyn BatchSink) -> Image {
    let mut image = Image::filled(rays.width, rays.height, shading.background);
    for (i, normal) in hit_normals(rays, config, sink) {
        let diffuse = normal.map_or(0.0, |n| n.dot(&shading.light).max(0.0));
        image.pixels[i] = [0, 1, 2].map(|c| to_byte(shading.albedo[c] * diffuse + shading.ambient));
    }
    image
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    pub rays: RayBuffer,
    pub diagnostics: MarchDiagnostics,
}

/// Initializes, marches and shades in one go.
pub fn render(
    field: &dyn DistanceField,
    camera: &Camera,
    config: &MarchConfig,
    shading: &Shading,
    batch_size: Option<usize>,
) -> Result<RenderOutput, RenderError> {
    config.validate()?;
    let mut sink = FieldSink::new(field, batch_size);
    let mut rays = init_rays(camera);
    let diagnostics = march(&mut rays, config, &mut sink);
    let image = shade(&rays, shading, config, &mut sink);
    Ok(RenderOutput {
        image,
        rays,
        diagnostics,
    })
}
