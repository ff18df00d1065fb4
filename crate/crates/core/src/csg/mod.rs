//! The simplified CSG language.
//!
//! A [`Model`] is a union of axis-aligned primitives. Every primitive is an
//! origin-centered unit shape (cube, inscribed cylinder, or tapered cylinder)
//! moved into place by a per-axis scale and a translation. The model flattens
//! to a parameter vector laid out per primitive as
//! `[tx, ty, tz, sx, sy, sz]`, followed by `r_top` for tapered cylinders.

mod mesh;
mod proxy;

pub use mesh::{tessellate, tessellate_visible, MeshPart, TriangleMesh};
pub use proxy::{face_map, keypoints, FaceMap, FaceRow, Keypoint, KeypointId};

use std::ops::{Deref, DerefMut};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AXES: [char; 3] = ['x', 'y', 'z'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Cube,
    CylinderX,
    CylinderY,
    CylinderZ,
    ConeCylinderY,
}

impl PrimitiveKind {
    pub fn param_count(self) -> usize {
        match self {
            PrimitiveKind::ConeCylinderY => 7,
            _ => 6,
        }
    }

    /// Axis of revolution for cylinder kinds.
    pub fn axis(self) -> Option<usize> {
        match self {
            PrimitiveKind::Cube => None,
            PrimitiveKind::CylinderX => Some(0),
            PrimitiveKind::CylinderY | PrimitiveKind::ConeCylinderY => Some(1),
            PrimitiveKind::CylinderZ => Some(2),
        }
    }

    pub fn is_cylinder(self) -> bool {
        self.axis().is_some()
    }

    pub fn has_top_radius(self) -> bool {
        self == PrimitiveKind::ConeCylinderY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub name: String,
    pub translation: [f64; 3],
    pub scale: [f64; 3],
    pub top_radius: Option<f64>,
}

impl Primitive {
    pub fn cube(name: &str, translation: [f64; 3], scale: [f64; 3]) -> Self {
        Self::new(PrimitiveKind::Cube, name, translation, scale)
    }

    pub fn new(kind: PrimitiveKind, name: &str, translation: [f64; 3], scale: [f64; 3]) -> Self {
        Primitive {
            kind,
            name: name.to_string(),
            translation,
            scale,
            top_radius: kind.has_top_radius().then_some(1.0),
        }
    }

    pub fn cone(name: &str, translation: [f64; 3], scale: [f64; 3], top_radius: f64) -> Self {
        Primitive {
            top_radius: Some(top_radius),
            ..Self::new(PrimitiveKind::ConeCylinderY, name, translation, scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, &s) in self.scale.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::DegenerateScale {
                    primitive: self.name.clone(),
                    axis: AXES[axis],
                    value: s,
                });
            }
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "{}: non-finite translation",
                self.name
            )));
        }
        match (self.kind.has_top_radius(), self.top_radius) {
            (true, Some(r)) if (0.0..=1.0).contains(&r) => Ok(()),
            (true, Some(r)) => Err(Error::TopRadiusOutOfRange {
                primitive: self.name.clone(),
                value: r,
            }),
            (true, None) => Err(Error::InvalidModel(format!(
                "{}: cone_cylinder_y requires top_radius",
                self.name
            ))),
            (false, Some(_)) => Err(Error::InvalidModel(format!(
                "{}: top_radius only allowed on cone_cylinder_y",
                self.name
            ))),
            (false, None) => Ok(()),
        }
    }

    pub fn aabb(&self) -> Aabb {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..3 {
            min[a] = self.translation[a] - 0.5 * self.scale[a];
            max[a] = self.translation[a] + 0.5 * self.scale[a];
        }
        Aabb { min, max }
    }
}

/// Flat parameter vector of a [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        ParamVector(v.iter().copied().collect())
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.min[a] > self.max[a])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }

    pub fn extend(&mut self, p: [f64; 3]) {
        for (a, &v) in p.iter().enumerate() {
            self.min[a] = self.min[a].min(v);
            self.max[a] = self.max[a].max(v);
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| 0.5 * (self.min[a] + self.max[a]))
    }

    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.max[a] - self.min[a])
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().iter().product()
        }
    }

    pub fn intersection(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].max(other.min[a]);
            out.max[a] = out.max[a].min(other.max[a]);
        }
        out
    }
}

/// An ordered union of primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub category: String,
    pub primitives: Vec<Primitive>,
}

impl Model {
    pub fn new(category: &str, primitives: Vec<Primitive>) -> Result<Self> {
        let model = Model {
            category: category.to_string(),
            primitives,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::InvalidModel(
                "model must contain at least one primitive".into(),
            ));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "primitive {i} has an empty name"
                )));
            }
            if self.primitives[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidModel(format!(
                    "duplicate primitive name {:?}",
                    p.name
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn primitive_count(&self) -> usize {
        self.primitives.len()
    }

    /// Parameter dimension `d`.
    pub fn dim(&self) -> usize {
        self.primitives.iter().map(|p| p.kind.param_count()).sum()
    }

    /// Start offset of each primitive's block in the parameter vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.primitives.len());
        let mut at = 0;
        for p in &self.primitives {
            out.push(at);
            at += p.kind.param_count();
        }
        out
    }

    pub fn flatten(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.dim());
        for p in &self.primitives {
            v.extend_from_slice(&p.translation);
            v.extend_from_slice(&p.scale);
            if let Some(r) = p.top_radius {
                v.push(r);
            }
        }
        ParamVector(v)
    }

    /// Returns a copy with parameters replaced by `x`. Rejects degenerate
    /// scales and out-of-range top radii.
    pub fn unflatten(&self, x: &[f64]) -> Result<Model> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let mut out = self.clone();
        let mut at = 0;
        for p in &mut out.primitives {
            p.translation.copy_from_slice(&x[at..at + 3]);
            p.scale.copy_from_slice(&x[at + 3..at + 6]);
            if p.kind.has_top_radius() {
                p.top_radius = Some(x[at + 6]);
            }
            at += p.kind.param_count();
            p.validate()?;
        }
        Ok(out)
    }

    pub fn check_params(&self, x: &[f64]) -> Result<()> {
        self.unflatten(x).map(|_| ())
    }

    pub fn translation_index(&self, primitive: usize, axis: usize) -> usize {
        self.offsets()[primitive] + axis
    }

    pub fn scale_index(&self, primitive: usize, axis: usize) -> usize {
        self.offsets()[primitive] + 3 + axis
    }

    /// Indices of all scale entries in the parameter vector.
    pub fn scale_indices(&self) -> Vec<usize> {
        self.offsets()
            .into_iter()
            .flat_map(|o| (3..6).map(move |a| o + a))
            .collect()
    }

    /// Indices of `r_top` entries.
    pub fn top_radius_indices(&self) -> Vec<usize> {
        self.offsets()
            .into_iter()
            .zip(&self.primitives)
            .filter(|(_, p)| p.kind.has_top_radius())
            .map(|(o, _)| o + 6)
            .collect()
    }

    pub fn index_label(&self, index: usize) -> String {
        let offsets = self.offsets();
        let i = offsets.iter().rposition(|&o| o <= index).unwrap_or(0);
        let local = index - offsets[i];
        let name = &self.primitives[i].name;
        match local {
            0..=2 => format!("{name}.t{}", AXES[local]),
            3..=5 => format!("{name}.s{}", AXES[local - 3]),
            _ => format!("{name}.r_top"),
        }
    }

    /// Analytic bounds of the union of primitive boxes at `x`.
    pub fn aabb(&self, x: &[f64]) -> Aabb {
        let mut b = Aabb::empty();
        for o in self.offsets() {
            for a in 0..3 {
                let (t, s) = (x[o + a], x[o + 3 + a].abs());
                b.min[a] = b.min[a].min(t - 0.5 * s);
                b.max[a] = b.max[a].max(t + 0.5 * s);
            }
        }
        b
    }

    pub fn bbox_diagonal(&self, x: &[f64]) -> f64 {
        self.aabb(x).diagonal()
    }
}

/// A model instance prepared for fast point-membership queries.
#[derive(Clone, Debug)]
pub struct Solid {
    parts: Vec<SolidPart>,
}

#[derive(Clone, Copy, Debug)]
struct SolidPart {
    kind: PrimitiveKind,
    center: [f64; 3],
    inv_scale: [f64; 3],
    top_radius: f64,
}

impl Solid {
    /// Builds the solid for `x`. `x` must have the model's dimension.
    pub fn new(model: &Model, x: &[f64]) -> Self {
        Self::with_visibility(model, x, None)
    }

    pub fn with_visibility(model: &Model, x: &[f64], visible: Option<&[bool]>) -> Self {
        let parts = model
            .primitives
            .iter()
            .zip(model.offsets())
            .enumerate()
            .filter(|(i, _)| visible.is_none_or(|v| v[*i]))
            .map(|(_, (p, o))| SolidPart {
                kind: p.kind,
                center: [x[o], x[o + 1], x[o + 2]],
                inv_scale: [1.0 / x[o + 3], 1.0 / x[o + 4], 1.0 / x[o + 5]],
                top_radius: if p.kind.has_top_radius() {
                    x[o + 6]
                } else {
                    1.0
                },
            })
            .collect();
        Solid { parts }
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    #[inline]
    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.parts.iter().any(|part| part.contains(p))
    }
}

impl SolidPart {
    #[inline]
    fn contains(&self, p: [f64; 3]) -> bool {
        let q = [
            (p[0] - self.center[0]) * self.inv_scale[0],
            (p[1] - self.center[1]) * self.inv_scale[1],
            (p[2] - self.center[2]) * self.inv_scale[2],
        ];
        if q[0].abs() > 0.5 || q[1].abs() > 0.5 || q[2].abs() > 0.5 {
            return false;
        }
        let radial = |u: f64, v: f64, r: f64| u * u + v * v <= r * r;
        match self.kind {
            PrimitiveKind::Cube => true,
            PrimitiveKind::CylinderX => radial(q[1], q[2], 0.5),
            PrimitiveKind::CylinderY => radial(q[0], q[2], 0.5),
            PrimitiveKind::CylinderZ => radial(q[0], q[1], 0.5),
            PrimitiveKind::ConeCylinderY => {
                // radius 0.5 at the bottom, 0.5 * r_top at the top
                let r = 0.5 + (q[1] + 0.5) * (0.5 * self.top_radius - 0.5);
                radial(q[0], q[2], r)
            }
        }
    }
}

/// True iff `p` lies inside any primitive of `model` at parameters `x`.
pub fn contains(model: &Model, x: &[f64], p: [f64; 3]) -> bool {
    Solid::new(model, x).contains(p)
}
