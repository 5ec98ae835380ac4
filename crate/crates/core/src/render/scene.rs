use std::sync::Arc;

use nalgebra::{Rotation3, Unit};

use crate::distance_field::SdfGrid;
use crate::field::DistanceField;
use crate::format::NeuralField;
use crate::geom::Vec3;

/// A CSG expression over distance-field leaves. Leaves are evaluated in
/// their own local frame; transforms are rigid, so distances carry over.
#[derive(Debug, Clone)]
pub enum SdfScene {
    Sphere {
        radius: f64,
    },
    Box {
        half_extent: Vec3,
    },
    /// A network evaluated in its normalized frame. Its value is scaled by
    /// `relaxation` to shorten marching steps on non-Lipschitz predictions.
    Neural {
        field: Arc<NeuralField>,
        relaxation: f64,
    },
    Grid(Arc<SdfGrid>),
    /// Contains nothing: the distance is `+inf` everywhere.
    Empty,
    Translate {
        offset: Vec3,
        child: Box<SdfScene>,
    },
    Rotate {
        rotation: Rotation3<f64>,
        child: Box<SdfScene>,
    },
    Union(Box<SdfScene>, Box<SdfScene>),
    Intersection(Box<SdfScene>, Box<SdfScene>),
    Difference(Box<SdfScene>, Box<SdfScene>),
}

impl SdfScene {
    pub fn sphere(radius: f64) -> Self {
        Self::Sphere { radius }
    }

    pub fn cuboid(half_extent: Vec3) -> Self {
        Self::Box { half_extent }
    }

    pub fn neural(field: NeuralField) -> Self {
        Self::Neural {
            field: Arc::new(field),
            relaxation: 1.0,
        }
    }

    pub fn translate(self, offset: Vec3) -> Self {
        Self::Translate {
            offset,
            child: Box::new(self),
        }
    }

    /// Rotation by `degrees` about `axis`; `None` for a zero axis.
    pub fn rotate(self, axis: Vec3, degrees: f64) -> Option<Self> {
        let axis = Unit::try_new(axis, 1e-12)?;
        Some(Self::Rotate {
            rotation: Rotation3::from_axis_angle(&axis, degrees.to_radians()),
            child: Box::new(self),
        })
    }

    pub fn union(a: Self, b: Self) -> Self {
        Self::Union(Box::new(a), Box::new(b))
    }

    pub fn intersection(a: Self, b: Self) -> Self {
        Self::Intersection(Box::new(a), Box::new(b))
    }

    pub fn difference(a: Self, b: Self) -> Self {
        Self::Difference(Box::new(a), Box::new(b))
    }

    pub fn evaluate(&self, q: &Vec3) -> f64 {
        match self {
            Self::Sphere { radius } => q.norm() - radius,
            Self::Box { half_extent } => {
                let d = q.abs() - half_extent;
                let outside = d.map(|v| v.max(0.0)).norm();
                let inside = d.x.max(d.y).max(d.z).min(0.0);
                outside + inside
            }
            Self::Neural { field, relaxation } => relaxation * field.distance(q),
            Self::Grid(grid) => grid.query(q),
            Self::Empty => f64::INFINITY,
            Self::Translate { offset, child } => child.evaluate(&(q - offset)),
            Self::Rotate { rotation, child } => child.evaluate(&rotation.inverse_transform_vector(q)),
            Self::Union(a, b) => a.evaluate(q).min(b.evaluate(q)),
            Self::Intersection(a, b) => a.evaluate(q).max(b.evaluate(q)),
            Self::Difference(a, b) => a.evaluate(q).max(-b.evaluate(q)),
        }
    }
}

impl DistanceField for SdfScene {
    fn distance(&self, p: &Vec3) -> f64 {
        self.evaluate(p)
    }
}
