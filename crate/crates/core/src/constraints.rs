//! Candidate geometric relations present in a model.
//!
//! Every relation is a conjunction of homogeneous linear rows `c . x = 0`
//! over the parameter vector, so any set of them cuts out a linear subspace.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csg::{face_map, keypoints, KeypointId, Model, AXES};
use crate::error::{Error, Result};
use crate::numeric::rank;

pub const DEFAULT_EPS_REL: f64 = 1e-5;

/// Relation kinds, in tie-break priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    DimEqual,
    Coplanar,
    Coaxial,
    KeypointCoincident,
}

impl ConstraintKind {
    pub fn arity(self) -> usize {
        match self {
            ConstraintKind::DimEqual | ConstraintKind::Coplanar => 1,
            ConstraintKind::Coaxial => 2,
            ConstraintKind::KeypointCoincident => 3,
        }
    }
}

/// Sparse homogeneous row, scaled to unit max-abs coefficient with a
/// positive leading coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintRow {
    coeffs: Vec<(usize, f64)>,
}

impl ConstraintRow {
    /// Returns `None` for an all-zero row.
    pub fn new(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Option<Self> {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        let mut sorted: Vec<_> = coeffs.into_iter().collect();
        sorted.sort_by_key(|c| c.0);
        for (i, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        let max = merged.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
        if max == 0.0 {
            return None;
        }
        let scale = merged[0].1.signum() / max;
        for c in &mut merged {
            c.1 *= scale;
        }
        Some(ConstraintRow { coeffs: merged })
    }

    pub fn coeffs(&self) -> &[(usize, f64)] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, v)| v * x[i]).sum()
    }

    fn key(&self) -> Vec<(usize, u64)> {
        self.coeffs.iter().map(|&(i, v)| (i, v.to_bits())).collect()
    }
}

/// One end of a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "feature", rename_all = "snake_case")]
pub enum Participant {
    Face {
        primitive: usize,
        axis: usize,
        positive: bool,
    },
    Axis {
        primitive: usize,
        axis: usize,
    },
    Keypoint {
        primitive: usize,
        keypoint: KeypointId,
    },
    Scale {
        primitive: usize,
        axis: usize,
    },
}

impl Participant {
    pub fn primitive(&self) -> usize {
        match *self {
            Participant::Face { primitive, .. }
            | Participant::Axis { primitive, .. }
            | Participant::Keypoint { primitive, .. }
            | Participant::Scale { primitive, .. } => primitive,
        }
    }

    fn ordinal(&self) -> usize {
        match *self {
            Participant::Face { axis, positive, .. } => 2 * axis + (!positive) as usize,
            Participant::Axis { axis, .. } | Participant::Scale { axis, .. } => axis,
            Participant::Keypoint { keypoint, .. } => keypoint.ordinal(),
        }
    }

    pub fn label(&self, model: &Model) -> String {
        let name = &model.primitives[self.primitive()].name;
        match *self {
            Participant::Face { axis, positive, .. } => {
                format!("{name}.{}{}", if positive { '+' } else { '-' }, AXES[axis])
            }
            Participant::Axis { axis, .. } => format!("{name}.axis_{}", AXES[axis]),
            Participant::Keypoint { keypoint, .. } => format!("{name}.{}", keypoint.label()),
            Participant::Scale { axis, .. } => format!("{name}.s{}", AXES[axis]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticConstraint {
    pub kind: ConstraintKind,
    pub rows: Vec<ConstraintRow>,
    pub participants: Vec<Participant>,
    pub label: String,
}

impl SemanticConstraint {
    /// Largest absolute row residual at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.eval(x).abs())
            .fold(0.0, f64::max)
    }

    /// Tie-break key: kind priority, then participant order.
    pub fn priority_key(&self) -> (ConstraintKind, Vec<(usize, usize)>) {
        (
            self.kind,
            self.participants
                .iter()
                .map(|p| (p.primitive(), p.ordinal()))
                .collect(),
        )
    }

    fn row_set_key(&self) -> Vec<Vec<(usize, u64)>> {
        let mut keys: Vec<_> = self.rows.iter().map(|r| r.key()).collect();
        keys.sort();
        keys
    }

    fn primitive_pair(&self) -> Vec<usize> {
        let mut p: Vec<_> = self.participants.iter().map(|p| p.primitive()).collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

/// Relations that hold at the base parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub constraints: Vec<SemanticConstraint>,
    pub eps_rel: f64,
    /// Absolute detection tolerance `eps_rel * bbox diagonal`.
    pub tolerance: f64,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn from_constraints(constraints: Vec<SemanticConstraint>) -> Self {
        CandidatePool {
            constraints,
            eps_rel: 0.0,
            tolerance: 0.0,
        }
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.label == label)
    }
}

/// Enumerates coplanarity, coaxiality, keypoint coincidence, and dimensional
/// equality relations holding at `x0` within `eps_rel` times the bounding-box
/// diagonal.
pub fn enumerate_candidates(model: &Model, x0: &[f64], eps_rel: f64) -> Result<CandidatePool> {
    model.check_params(x0)?;
    if !(eps_rel >= 0.0) {
        return Err(Error::InvalidArgument(
            "eps_rel must be non-negative".into(),
        ));
    }
    let tol = eps_rel * model.bbox_diagonal(x0);
    let p = model.primitive_count();
    let mut found = Vec::new();

    let holds = |rows: &[ConstraintRow]| rows.iter().all(|r| r.eval(x0).abs() <= tol);
    let mut push = |kind, rows: Vec<ConstraintRow>, participants: Vec<Participant>| {
        if rows.len() == kind_arity(kind) && holds(&rows) {
            let label = make_label(model, kind, &participants);
            found.push(SemanticConstraint {
                kind,
                rows,
                participants,
                label,
            });
        }
    };

    // dimensional equality across and within primitives
    let scales: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..3).map(move |a| (i, a))).collect();
    for (k, &(i, a)) in scales.iter().enumerate() {
        for &(j, b) in &scales[k + 1..] {
            if crosses_radius_axes(model, i, a, j, b) {
                continue;
            }
            let row = ConstraintRow::new([
                (model.scale_index(i, a), 1.0),
                (model.scale_index(j, b), -1.0),
            ]);
            push(
                ConstraintKind::DimEqual,
                row.into_iter().collect(),
                vec![
                    Participant::Scale {
                        primitive: i,
                        axis: a,
                    },
                    Participant::Scale {
                        primitive: j,
                        axis: b,
                    },
                ],
            );
        }
    }

    // coplanar faces
    let fm = face_map(model);
    for axis in 0..3 {
        for i in 0..p {
            for j in i + 1..p {
                for si in [true, false] {
                    for sj in [true, false] {
                        let fi = &fm.rows[6 * i + 2 * axis + (!si) as usize];
                        let fj = &fm.rows[6 * j + 2 * axis + (!sj) as usize];
                        let row = ConstraintRow::new([
                            (fi.translation_index, 1.0),
                            (fi.scale_index, 0.5 * fi.sign),
                            (fj.translation_index, -1.0),
                            (fj.scale_index, -0.5 * fj.sign),
                        ]);
                        push(
                            ConstraintKind::Coplanar,
                            row.into_iter().collect(),
                            vec![
                                Participant::Face {
                                    primitive: i,
                                    axis,
                                    positive: si,
                                },
                                Participant::Face {
                                    primitive: j,
                                    axis,
                                    positive: sj,
                                },
                            ],
                        );
                    }
                }
            }
        }
    }

    // shared axis: both transverse center coordinates equal
    for axis in 0..3 {
        for i in 0..p {
            for j in i + 1..p {
                let rows: Vec<_> = (0..3)
                    .filter(|&b| b != axis)
                    .filter_map(|b| {
                        ConstraintRow::new([
                            (model.translation_index(i, b), 1.0),
                            (model.translation_index(j, b), -1.0),
                        ])
                    })
                    .collect();
                push(
                    ConstraintKind::Coaxial,
                    rows,
                    vec![
                        Participant::Axis { primitive: i, axis },
                        Participant::Axis { primitive: j, axis },
                    ],
                );
            }
        }
    }

    // coincident keypoints
    let kps = keypoints(model);
    for i in 0..p {
        for j in i + 1..p {
            for ka in &kps[9 * i..9 * i + 9] {
                for kb in &kps[9 * j..9 * j + 9] {
                    let rows: Vec<_> = (0..3)
                        .filter_map(|axis| {
                            let a = ka.row(axis);
                            let b = kb.row(axis).into_iter().map(|(k, v)| (k, -v));
                            ConstraintRow::new(a.into_iter().chain(b))
                        })
                        .collect();
                    push(
                        ConstraintKind::KeypointCoincident,
                        rows,
                        vec![
                            Participant::Keypoint {
                                primitive: i,
                                keypoint: ka.id,
                            },
                            Participant::Keypoint {
                                primitive: j,
                                keypoint: kb.id,
                            },
                        ],
                    );
                }
            }
        }
    }

    Ok(CandidatePool {
        constraints: dedup(found, model.dim()),
        eps_rel,
        tolerance: tol,
    })
}

fn kind_arity(kind: ConstraintKind) -> usize {
    kind.arity()
}

/// Cylinders along different axes never get their radii equated.
fn crosses_radius_axes(model: &Model, i: usize, a: usize, j: usize, b: usize) -> bool {
    let (ki, kj) = (model.primitives[i].kind, model.primitives[j].kind);
    match (ki.axis(), kj.axis()) {
        (Some(ai), Some(aj)) => ai != aj && a != ai && b != aj,
        _ => false,
    }
}

fn make_label(model: &Model, kind: ConstraintKind, parts: &[Participant]) -> String {
    let names: Vec<String> = parts.iter().map(|p| p.label(model)).collect();
    match kind {
        ConstraintKind::DimEqual => format!("dim_equal({})", names.join(", ")),
        ConstraintKind::Coplanar => format!("coplanar({})", names.join(", ")),
        ConstraintKind::Coaxial => {
            let axis = match parts[0] {
                Participant::Axis { axis, .. } => AXES[axis],
                _ => '?',
            };
            let prims: Vec<&str> = parts
                .iter()
                .map(|p| model.primitives[p.primitive()].name.as_str())
                .collect();
            format!("coaxial_{axis}({})", prims.join(", "))
        }
        ConstraintKind::KeypointCoincident => format!("coincident({})", names.join(", ")),
    }
}

/// Merges identical row sets, then drops any relation whose row span lies
/// inside another relation of the same kind over the same primitives.
fn dedup(found: Vec<SemanticConstraint>, d: usize) -> Vec<SemanticConstraint> {
    let mut seen = HashSet::new();
    let unique: Vec<_> = found
        .into_iter()
        .filter(|c| seen.insert(c.row_set_key()))
        .collect();
    let keep: Vec<bool> = (0..unique.len())
        .map(|a| {
            let ca = &unique[a];
            !unique.iter().enumerate().any(|(b, cb)| {
                b != a
                    && cb.kind == ca.kind
                    && cb.primitive_pair() == ca.primitive_pair()
                    && span_contains(cb, ca, d)
                    // equal spans: the earlier one survives
                    && (b < a || !span_contains(ca, cb, d))
            })
        })
        .collect();
    unique
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

fn span_contains(outer: &SemanticConstraint, inner: &SemanticConstraint, d: usize) -> bool {
    let base = rows_of([outer], d);
    rank(&rows_of([outer, inner], d)) == rank(&base)
}

/// Stacks the rows of `set` into a dense `m x d` matrix, dropping repeats.
pub fn rows_of<'a>(
    set: impl IntoIterator<Item = &'a SemanticConstraint>,
    d: usize,
) -> DMatrix<f64> {
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for c in set {
        for r in &c.rows {
            if seen.insert(r.key()) {
                rows.push(r);
            }
        }
    }
    let mut m = DMatrix::zeros(rows.len(), d);
    for (i, r) in rows.iter().enumerate() {
        for &(j, v) in r.coeffs() {
            m[(i, j)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::Primitive;

    fn stacked() -> Model {
        Model::new(
            "t",
            vec![
                Primitive::cube("lower", [0.0; 3], [1.0; 3]),
                Primitive::cube("upper", [0.0, 1.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn row_normalization() {
        let r = ConstraintRow::new([(3, -2.0), (1, 1.0), (3, 0.0)]).unwrap();
        assert_eq!(r.coeffs(), &[(1, 0.5), (3, -1.0)]);
        assert!(ConstraintRow::new([(0, 1.0), (0, -1.0)]).is_none());
    }

    #[test]
    fn stacked_cubes_relations() {
        let m = stacked();
        let x0 = m.flatten();
        let pool = enumerate_candidates(&m, &x0, DEFAULT_EPS_REL).unwrap();
        let labels: Vec<&str> = pool.constraints.iter().map(|c| c.label.as_str()).collect();
        assert!(
            labels.contains(&"coplanar(lower.+y, upper.-y)"),
            "{labels:?}"
        );
        assert!(labels.contains(&"coaxial_y(lower, upper)"));
        for axis in ["sx", "sy", "sz"] {
            let l = format!("dim_equal(lower.{axis}, upper.{axis})");
            assert!(labels.contains(&l.as_str()), "{l}");
        }
        assert!(labels.contains(&"dim_equal(lower.sx, lower.sy)"));
        assert!(labels.contains(&"dim_equal(upper.sy, upper.sz)"));
        for c in &pool.constraints {
            assert!(c.violation(&x0) <= pool.tolerance);
            assert_eq!(c.rows.len(), c.kind.arity());
        }
    }

    #[test]
    fn offset_cubes_share_no_planes() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cube("b", [1.3, 1.7, 2.1], [1.0; 3]),
            ],
        )
        .unwrap();
        let pool = enumerate_candidates(&m, &m.flatten(), 1e-6).unwrap();
        assert!(pool
            .constraints
            .iter()
            .all(|c| c.kind == ConstraintKind::DimEqual));
    }

    #[test]
    fn cross_axis_radii_not_equated() {
        let m = Model::new(
            "t",
            vec![
                Primitive::new(
                    crate::csg::PrimitiveKind::CylinderX,
                    "a",
                    [0.0; 3],
                    [1.0; 3],
                ),
                Primitive::new(
                    crate::csg::PrimitiveKind::CylinderY,
                    "b",
                    [3.0, 0.0, 0.0],
                    [1.0; 3],
                ),
            ],
        )
        .unwrap();
        let pool = enumerate_candidates(&m, &m.flatten(), 1e-6).unwrap();
        let labels: Vec<&str> = pool.constraints.iter().map(|c| c.label.as_str()).collect();
        // a's radius axes are y,z; b's are x,z
        assert!(!labels.contains(&"dim_equal(a.sy, b.sx)"));
        assert!(!labels.contains(&"dim_equal(a.sz, b.sz)"));
        // length of a vs radius of b is allowed
        assert!(labels.contains(&"dim_equal(a.sx, b.sx)"));
        assert!(labels.contains(&"dim_equal(a.sy, a.sz)"));
    }

    #[test]
    fn rows_of_examples() {
        let m = stacked();
        let pool = enumerate_candidates(&m, &m.flatten(), DEFAULT_EPS_REL).unwrap();
        assert_eq!(rows_of(std::iter::empty(), 12).shape(), (0, 12));
        let kp = pool
            .constraints
            .iter()
            .find(|c| c.kind == ConstraintKind::KeypointCoincident)
            .unwrap();
        assert_eq!(rows_of([kp], 12).nrows(), 3);
        let c = &pool.constraints[0];
        assert_eq!(rows_of([c, c], 12).nrows(), 1);
    }

    #[test]
    fn identical_row_sets_merged() {
        let m = stacked();
        let pool = enumerate_candidates(&m, &m.flatten(), DEFAULT_EPS_REL).unwrap();
        let keys: HashSet<_> = pool.constraints.iter().map(|c| c.row_set_key()).collect();
        assert_eq!(keys.len(), pool.len());
    }
}
