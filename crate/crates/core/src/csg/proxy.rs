//! Linear proxy geometry over the parameter vector: axis-aligned faces of each
//! primitive's bounding box, and box keypoints (corners and center).

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Model, AXES};

/// One face of a primitive's bounding box: coordinate `t[axis] + sign * 0.5 * s[axis]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceRow {
    pub primitive: usize,
    pub axis: usize,
    /// +1.0 or -1.0
    pub sign: f64,
    pub translation_index: usize,
    pub scale_index: usize,
}

impl FaceRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        x[self.translation_index] + self.sign * 0.5 * x[self.scale_index]
    }

    pub fn label(&self, model: &Model) -> String {
        let s = if self.sign > 0.0 { '+' } else { '-' };
        format!(
            "{}.{}{}",
            model.primitives[self.primitive].name, s, AXES[self.axis]
        )
    }
}

/// Sparse map `Q` from parameters to the 6P reduced face coordinates, with
/// per-face volume weights `a` frozen at the parameters it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceMap {
    pub rows: Vec<FaceRow>,
    pub weights: Vec<f64>,
    pub primitive_count: usize,
    pub dim: usize,
    /// Set when the model has tapered cylinders, whose shape changes with
    /// `r_top` and breaks the fixed-shape proxy.
    pub alg1_unsound: bool,
}

impl FaceMap {
    /// Dense `Q` (6P x d).
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.rows.len(), self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            q[(r, row.translation_index)] = 1.0;
            q[(r, row.scale_index)] = row.sign * 0.5;
        }
        q
    }

    /// Dense `A Q` with `A = diag(a)`.
    pub fn weighted_q(&self) -> DMatrix<f64> {
        let mut q = self.q_matrix();
        for (r, w) in self.weights.iter().enumerate() {
            q.row_mut(r).scale_mut(*w);
        }
        q
    }

    pub fn face_coords(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(x)).collect()
    }
}

/// Builds the face map of `model` with weights evaluated at the model's own
/// parameters. Rows are ordered by primitive, then axis, then `+` before `-`.
pub fn face_map(model: &Model) -> FaceMap {
    let x = model.flatten();
    let mut rows = Vec::with_capacity(6 * model.primitive_count());
    let mut weights = Vec::with_capacity(rows.capacity());
    for (i, (p, o)) in model.primitives.iter().zip(model.offsets()).enumerate() {
        let ratio = if p.kind.is_cylinder() { FRAC_PI_4 } else { 1.0 };
        for axis in 0..3 {
            let area = (0..3)
                .filter(|&b| b != axis)
                .map(|b| x[o + 3 + b])
                .product::<f64>();
            for sign in [1.0, -1.0] {
                rows.push(FaceRow {
                    primitive: i,
                    axis,
                    sign,
                    translation_index: o + axis,
                    scale_index: o + 3 + axis,
                });
                weights.push(area * ratio);
            }
        }
    }
    FaceMap {
        rows,
        weights,
        primitive_count: model.primitive_count(),
        dim: model.dim(),
        alg1_unsound: model.primitives.iter().any(|p| p.kind.has_top_radius()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeypointId {
    /// Corner with per-axis sign bits (bit set = `+`).
    Corner(u8),
    Center,
}

impl KeypointId {
    pub fn all() -> [KeypointId; 9] {
        let mut out = [KeypointId::Center; 9];
        for bits in 0..8u8 {
            out[bits as usize] = KeypointId::Corner(bits);
        }
        out
    }

    /// Offset from the center in units of half the scale, per axis.
    pub fn signs(self) -> [f64; 3] {
        match self {
            KeypointId::Center => [0.0; 3],
            KeypointId::Corner(bits) => {
                [0, 1, 2].map(|a| if bits >> a & 1 == 1 { 1.0 } else { -1.0 })
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            KeypointId::Center => "center".into(),
            KeypointId::Corner(_) => {
                let s: String = self
                    .signs()
                    .iter()
                    .map(|&v| if v > 0.0 { '+' } else { '-' })
                    .collect();
                format!("c{s}")
            }
        }
    }

    pub fn ordinal(self) -> usize {
        match self {
            KeypointId::Corner(b) => b as usize,
            KeypointId::Center => 8,
        }
    }
}

/// A box keypoint whose position is `t + signs * 0.5 * s` per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub primitive: usize,
    pub id: KeypointId,
    pub translation_indices: [usize; 3],
    pub scale_indices: [usize; 3],
}

impl Keypoint {
    /// Sparse coefficients of the position along `axis`.
    pub fn row(&self, axis: usize) -> Vec<(usize, f64)> {
        let sign = self.id.signs()[axis];
        let mut row = vec![(self.translation_indices[axis], 1.0)];
        if sign != 0.0 {
            row.push((self.scale_indices[axis], 0.5 * sign));
        }
        row
    }

    pub fn position(&self, x: &[f64]) -> [f64; 3] {
        let signs = self.id.signs();
        [0, 1, 2]
            .map(|a| x[self.translation_indices[a]] + signs[a] * 0.5 * x[self.scale_indices[a]])
    }
}

/// Nine keypoints per primitive: eight corners then the center.
pub fn keypoints(model: &Model) -> Vec<Keypoint> {
    let mut out = Vec::with_capacity(9 * model.primitive_count());
    for (i, o) in model.offsets().into_iter().enumerate() {
        for id in KeypointId::all() {
            out.push(Keypoint {
                primitive: i,
                id,
                translation_indices: [o, o + 1, o + 2],
                scale_indices: [o + 3, o + 4, o + 5],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::csg::{Primitive, PrimitiveKind};

    #[test]
    fn cube_face_coordinate_and_weight() {
        let m = Model::new("t", vec![Primitive::cube("c", [0.0; 3], [2.0; 3])]).unwrap();
        let fm = face_map(&m);
        let x = m.flatten();
        // rows: (x,+), (x,-), (y,+), (y,-), (z,+), (z,-)
        assert_eq!(fm.rows[4].eval(&x), 1.0);
        assert_eq!(fm.rows[5].eval(&x), -1.0);
        assert_eq!(fm.weights[4], 4.0);
        assert!(!fm.alg1_unsound);
    }

    #[test]
    fn cylinder_weights_scaled_by_area_ratio() {
        let m = Model::new(
            "t",
            vec![Primitive::new(
                PrimitiveKind::CylinderY,
                "c",
                [0.0; 3],
                [2.0, 4.0, 2.0],
            )],
        )
        .unwrap();
        let fm = face_map(&m);
        // +y face
        assert!((fm.weights[2] - PI).abs() < 1e-15);
        // side faces too: +x face area 4*2
        assert!((fm.weights[0] - 8.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn cone_flags_unsound() {
        let m = Model::new("t", vec![Primitive::cone("c", [0.0; 3], [1.0; 3], 0.5)]).unwrap();
        assert!(face_map(&m).alg1_unsound);
    }

    #[test]
    fn q_has_two_nonzeros_per_row() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cone("b", [0.0; 3], [1.0; 3], 0.5),
            ],
        )
        .unwrap();
        let q = face_map(&m).q_matrix();
        assert_eq!(q.nrows(), 12);
        for r in 0..q.nrows() {
            assert_eq!(q.row(r).iter().filter(|v| **v != 0.0).count(), 2);
        }
    }

    #[test]
    fn keypoint_positions() {
        let m = Model::new("t", vec![Primitive::cube("c", [1.0, 0.0, 0.0], [2.0; 3])]).unwrap();
        let x = m.flatten();
        let kps = keypoints(&m);
        assert_eq!(kps.len(), 9);
        assert_eq!(kps[7].id, KeypointId::Corner(7));
        assert_eq!(kps[7].position(&x), [2.0, 1.0, 1.0]);
        assert_eq!(kps[8].position(&x), [1.0, 0.0, 0.0]);
        assert_eq!(kps[7].id.label(), "c+++");
    }

    #[test]
    fn stacked_cubes_share_corners() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("lo", [0.0; 3], [1.0; 3]),
                Primitive::cube("hi", [0.0, 1.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap();
        let x = m.flatten();
        let kps = keypoints(&m);
        let top_of_lo: Vec<_> = kps[..8]
            .iter()
            .filter(|k| k.id.signs()[1] > 0.0)
            .map(|k| k.position(&x))
            .collect();
        let bottom_of_hi: Vec<_> = kps[9..17]
            .iter()
            .filter(|k| k.id.signs()[1] < 0.0)
            .map(|k| k.position(&x))
            .collect();
        assert_eq!(top_of_lo.len(), 4);
        for p in top_of_lo {
            assert!(bottom_of_hi.contains(&p));
        }
    }
}
