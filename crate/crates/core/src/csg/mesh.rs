use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Aabb, Model, PrimitiveKind};
use crate::error::{invalid, Result};

/// Indexed triangle mesh with one contiguous vertex/triangle range per
/// primitive. Primitives are not merged; overlapping parts interpenetrate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub parts: Vec<MeshPart>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshPart {
    pub primitive: usize,
    pub name: String,
    pub first_vertex: usize,
    pub vertex_count: usize,
    pub first_triangle: usize,
    pub triangle_count: usize,
}

impl TriangleMesh {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn aabb(&self) -> Aabb {
        let mut b = Aabb::empty();
        for &p in &self.positions {
            b.extend(p);
        }
        b
    }

    /// ASCII OBJ with one `o` block per primitive.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for part in &self.parts {
            let _ = writeln!(out, "o {}", part.name);
            for p in &self.positions[part.first_vertex..part.first_vertex + part.vertex_count] {
                let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
            }
            for t in &self.triangles[part.first_triangle..part.first_triangle + part.triangle_count]
            {
                let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            }
        }
        out
    }
}

/// Tessellates every primitive of `model` at `x`.
///
/// `segments` is the circumference subdivision for cylinders; it is rounded
/// up to a multiple of four so the ring touches all four sides of the box.
pub fn tessellate(model: &Model, x: &[f64], segments: usize) -> Result<TriangleMesh> {
    tessellate_visible(model, x, segments, None)
}

/// Like [`tessellate`], skipping primitives whose `visible` flag is false.
pub fn tessellate_visible(
    model: &Model,
    x: &[f64],
    segments: usize,
    visible: Option<&[bool]>,
) -> Result<TriangleMesh> {
    if segments < 8 {
        return Err(invalid("cylinder segments must be at least 8"));
    }
    let segments = segments.div_ceil(4) * 4;
    let model = model.unflatten(x)?;
    let mut mesh = TriangleMesh::default();
    for (i, p) in model.primitives.iter().enumerate() {
        if visible.is_some_and(|v| !v[i]) {
            continue;
        }
        let (local, tris) = match p.kind {
            PrimitiveKind::Cube => unit_cube(),
            PrimitiveKind::ConeCylinderY => unit_cylinder(segments, p.top_radius.unwrap_or(1.0)),
            _ => unit_cylinder(segments, 1.0),
        };
        let first_vertex = mesh.positions.len();
        let first_triangle = mesh.triangles.len();
        let axis_map = orient(p.kind);
        for v in &local {
            let v = axis_map(*v);
            mesh.positions
                .push([0, 1, 2].map(|a| p.translation[a] + p.scale[a] * v[a]));
        }
        let base = first_vertex as u32;
        mesh.triangles
            .extend(tris.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        mesh.parts.push(MeshPart {
            primitive: i,
            name: p.name.clone(),
            first_vertex,
            vertex_count: local.len(),
            first_triangle,
            triangle_count: tris.len(),
        });
    }
    Ok(mesh)
}

// Unit shapes are built along +y; this maps them onto the primitive's axis.
fn orient(kind: PrimitiveKind) -> fn([f64; 3]) -> [f64; 3] {
    match kind {
        PrimitiveKind::CylinderX => |v| [v[1], v[2], v[0]],
        PrimitiveKind::CylinderZ => |v| [v[2], v[0], v[1]],
        _ => |v| v,
    }
}

fn unit_cube() -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let mut verts = Vec::with_capacity(8);
    for i in 0..8u32 {
        verts.push([0, 1, 2].map(|a| if i >> a & 1 == 1 { 0.5 } else { -0.5 }));
    }
    // outward-facing quads, split into two triangles each
    let quads: [[u32; 4]; 6] = [
        [1, 3, 7, 5], // +x
        [0, 4, 6, 2], // -x
        [2, 6, 7, 3], // +y
        [0, 1, 5, 4], // -y
        [4, 5, 7, 6], // +z
        [0, 2, 3, 1], // -z
    ];
    let tris = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    (verts, tris)
}

/// Unit cylinder along y in [-0.5, 0.5]; the top ring has radius
/// `0.5 * top_radius`.
fn unit_cylinder(segments: usize, top_radius: f64) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let n = segments as u32;
    let mut verts = Vec::with_capacity(2 * segments + 2);
    for k in 0..segments {
        let (s, c) = (TAU * k as f64 / segments as f64).sin_cos();
        verts.push([0.5 * c, -0.5, 0.5 * s]);
    }
    for k in 0..segments {
        let (s, c) = (TAU * k as f64 / segments as f64).sin_cos();
        let r = 0.5 * top_radius;
        verts.push([r * c, 0.5, r * s]);
    }
    let bottom_center = 2 * n;
    let top_center = 2 * n + 1;
    verts.push([0.0, -0.5, 0.0]);
    verts.push([0.0, 0.5, 0.0]);

    let mut tris = Vec::with_capacity(4 * segments);
    for k in 0..n {
        let k1 = (k + 1) % n;
        tris.push([k, n + k1, k1]);
        tris.push([k, n + k, n + k1]);
        tris.push([bottom_center, k, k1]);
        tris.push([top_center, n + k1, n + k]);
    }
    (verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::Primitive;

    #[test]
    fn cube_mesh() {
        let m = Model::new(
            "t",
            vec![Primitive::cube("c", [1.0, 2.0, 3.0], [2.0, 4.0, 6.0])],
        )
        .unwrap();
        let mesh = tessellate(&m, &m.flatten(), 16).unwrap();
        assert_eq!(mesh.triangle_count(), 12);
        let b = mesh.aabb();
        assert_eq!(b.min, [0.0, 0.0, 0.0]);
        assert_eq!(b.max, [2.0, 4.0, 6.0]);
    }

    #[test]
    fn faces_point_outward() {
        for kind in [
            PrimitiveKind::Cube,
            PrimitiveKind::CylinderX,
            PrimitiveKind::CylinderY,
            PrimitiveKind::CylinderZ,
            PrimitiveKind::ConeCylinderY,
        ] {
            let mut p = Primitive::new(kind, "p", [0.0; 3], [1.0, 2.0, 3.0]);
            if kind.has_top_radius() {
                p.top_radius = Some(0.4);
            }
            let m = Model::new("t", vec![p]).unwrap();
            let mesh = tessellate(&m, &m.flatten(), 16).unwrap();
            for tri in &mesh.triangles {
                let [a, b, c] = tri.map(|i| mesh.positions[i as usize]);
                let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let n = [
                    e1[1] * e2[2] - e1[2] * e2[1],
                    e1[2] * e2[0] - e1[0] * e2[2],
                    e1[0] * e2[1] - e1[1] * e2[0],
                ];
                let centroid = [0, 1, 2].map(|k| (a[k] + b[k] + c[k]) / 3.0);
                let dot: f64 = (0..3).map(|k| n[k] * centroid[k]).sum();
                assert!(dot > 0.0, "{kind:?}");
            }
        }
    }

    #[test]
    fn cylinder_bounds_match_unit_cube() {
        for kind in [
            PrimitiveKind::CylinderX,
            PrimitiveKind::CylinderY,
            PrimitiveKind::CylinderZ,
        ] {
            let m = Model::new("t", vec![Primitive::new(kind, "c", [0.0; 3], [1.0; 3])]).unwrap();
            let mesh = tessellate(&m, &m.flatten(), 32).unwrap();
            let b = mesh.aabb();
            for a in 0..3 {
                assert!((b.min[a] + 0.5).abs() < 1e-12, "{kind:?} {b:?}");
                assert!((b.max[a] - 0.5).abs() < 1e-12, "{kind:?} {b:?}");
            }
            // ring vertices sit at radius 0.5 around the axis
            let axis = kind.axis().unwrap();
            for p in &mesh.positions {
                let r2: f64 = (0..3).filter(|&a| a != axis).map(|a| p[a] * p[a]).sum();
                assert!(r2.sqrt() < 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn cone_apex_collapses() {
        let m = Model::new("t", vec![Primitive::cone("c", [0.0; 3], [1.0; 3], 0.0)]).unwrap();
        let mesh = tessellate(&m, &m.flatten(), 8).unwrap();
        let top: Vec<_> = mesh.positions.iter().filter(|p| p[1] == 0.5).collect();
        assert!(!top.is_empty());
        for p in top {
            assert_eq!(p[0].abs() + p[2].abs(), 0.0);
        }
    }

    #[test]
    fn segments_validated_and_rounded() {
        let m = Model::new(
            "t",
            vec![Primitive::new(
                PrimitiveKind::CylinderY,
                "c",
                [0.0; 3],
                [1.0; 3],
            )],
        )
        .unwrap();
        assert!(tessellate(&m, &m.flatten(), 7).is_err());
        let mesh = tessellate(&m, &m.flatten(), 9).unwrap();
        assert_eq!(mesh.triangle_count(), 4 * 12);
    }

    #[test]
    fn obj_has_one_object_per_primitive() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cube("b", [2.0, 0.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap();
        let obj = tessellate(&m, &m.flatten(), 8).unwrap().to_obj();
        assert_eq!(
            obj.matches("\no ").count() + obj.starts_with("o ") as usize,
            2
        );
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 24);
        assert!(obj.contains("f 9 "));
    }

    #[test]
    fn hidden_primitives_skipped() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cube("b", [2.0, 0.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap();
        let mesh = tessellate_visible(&m, &m.flatten(), 8, Some(&[false, true])).unwrap();
        assert_eq!(mesh.parts.len(), 1);
        assert_eq!(mesh.parts[0].name, "b");
        assert!(mesh.triangles.iter().flatten().all(|&i| i < 8));
    }
}
