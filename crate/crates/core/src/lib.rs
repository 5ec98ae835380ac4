//! Neural implicits: tiny MLPs overfit to the signed distance field of a
//! single triangle mesh, plus the tooling around them (robust mesh signing,
//! importance sampling, a compact binary format, a sphere-marching renderer
//! and evaluation metrics).

pub mod distance_field;
pub mod eval;
pub mod field;
pub mod format;
pub mod geom;
pub mod mesh;
pub mod neural;
pub mod pipeline;
pub mod render;
pub mod sampling;
