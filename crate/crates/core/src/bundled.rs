//! Example models shipped with the crate. All are y-up and rest on y = 0.

use crate::constraints::CandidatePool;
use crate::csg::{Model, Primitive, PrimitiveKind};
use crate::discovery::{Variation, VariationSet};
use crate::error::Result;
use crate::synth::{ground_truth_subspace, SyntheticOffset, SyntheticSpec};

/// Cylinder body, tapered shoulder, cube cap (19 parameters).
pub fn bottle() -> Model {
    Model::new(
        "bottle",
        vec![
            Primitive::new(
                PrimitiveKind::CylinderY,
                "body",
                [0.0, 0.35, 0.0],
                [0.4, 0.7, 0.4],
            ),
            Primitive::cone("shoulder", [0.0, 0.8, 0.0], [0.4, 0.2, 0.4], 0.4),
            Primitive::cube("cap", [0.0, 0.95, 0.0], [0.16, 0.1, 0.16]),
        ],
    )
    .expect("bundled bottle is valid")
}

/// Box body with lens, flash, and shutter button (24 parameters).
pub fn camera() -> Model {
    Model::new(
        "camera",
        vec![
            Primitive::cube("body", [0.0, 0.3, 0.0], [1.0, 0.6, 0.4]),
            Primitive::new(
                PrimitiveKind::CylinderZ,
                "lens",
                [0.0, 0.3, 0.3],
                [0.4, 0.4, 0.2],
            ),
            Primitive::cube("flash", [0.35, 0.65, 0.0], [0.2, 0.1, 0.2]),
            Primitive::new(
                PrimitiveKind::CylinderY,
                "button",
                [-0.3, 0.625, 0.0],
                [0.12, 0.05, 0.12],
            ),
        ],
    )
    .expect("bundled camera is valid")
}

/// Seat, back, four legs, two arm panels (48 parameters).
pub fn chair() -> Model {
    let leg =
        |name: &str, x: f64, z: f64| Primitive::cube(name, [x, 0.2125, z], [0.05, 0.425, 0.05]);
    let arm = |name: &str, x: f64| Primitive::cube(name, [x, 0.575, 0.025], [0.05, 0.2, 0.45]);
    Model::new(
        "chair",
        vec![
            Primitive::cube("seat", [0.0, 0.45, 0.0], [0.5, 0.05, 0.5]),
            Primitive::cube("back", [0.0, 0.725, -0.225], [0.5, 0.5, 0.05]),
            leg("leg_fl", 0.225, 0.225),
            leg("leg_fr", -0.225, 0.225),
            leg("leg_bl", 0.225, -0.225),
            leg("leg_br", -0.225, -0.225),
            arm("arm_l", 0.225),
            arm("arm_r", -0.225),
        ],
    )
    .expect("bundled chair is valid")
}

/// Top, four legs, lower shelf (36 parameters).
pub fn table() -> Model {
    let leg =
        |name: &str, x: f64, z: f64| Primitive::cube(name, [x, 0.3625, z], [0.06, 0.725, 0.06]);
    Model::new(
        "table",
        vec![
            Primitive::cube("top", [0.0, 0.75, 0.0], [1.2, 0.05, 0.7]),
            leg("leg_fl", 0.57, 0.32),
            leg("leg_fr", -0.57, 0.32),
            leg("leg_bl", 0.57, -0.32),
            leg("leg_br", -0.57, -0.32),
            Primitive::cube("shelf", [0.0, 0.2, 0.0], [1.08, 0.03, 0.58]),
        ],
    )
    .expect("bundled table is valid")
}

/// Body, cabin, four wheels, rear spoiler (42 parameters).
pub fn car() -> Model {
    let wheel = |name: &str, x: f64, z: f64| {
        Primitive::new(PrimitiveKind::CylinderX, name, [x, 0.2, z], [0.2, 0.4, 0.4])
    };
    Model::new(
        "car",
        vec![
            Primitive::cube("body", [0.0, 0.35, 0.0], [2.0, 0.4, 0.9]),
            Primitive::cube("cabin", [-0.1, 0.75, 0.0], [1.0, 0.4, 0.8]),
            wheel("wheel_fl", 0.65, 0.5),
            wheel("wheel_fr", 0.65, -0.5),
            wheel("wheel_bl", -0.65, 0.5),
            wheel("wheel_br", -0.65, -0.5),
            Primitive::cube("spoiler", [-0.95, 0.6, 0.0], [0.1, 0.1, 0.8]),
        ],
    )
    .expect("bundled car is valid")
}

/// Named edit directions of the bundled chair, as parameter deltas. Each
/// keeps the chair's parts touching: legs stay on the floor and under the
/// seat, the back and arms stay on the seat.
pub fn chair_edit_directions() -> Vec<(&'static str, Vec<f64>)> {
    let m = chair();
    let d = m.dim();
    let t = |p: usize, a: usize| m.translation_index(p, a);
    let s = |p: usize, a: usize| m.scale_index(p, a);
    let (seat, back, arms) = (0, 1, [6, 7]);
    // leg index with its x and z side
    let legs = [
        (2, 1.0, 1.0),
        (3, -1.0, 1.0),
        (4, 1.0, -1.0),
        (5, -1.0, -1.0),
    ];
    let arm_side = [1.0, -1.0];
    let mut out = Vec::new();
    let mut dir = |name: &'static str, f: &mut dyn FnMut(&mut Vec<f64>)| {
        let mut v = vec![0.0; d];
        f(&mut v);
        out.push((name, v));
    };

    for (name, a) in [("move_x", 0), ("move_y", 1), ("move_z", 2)] {
        dir(name, &mut |v| (0..8).for_each(|p| v[t(p, a)] = 1.0));
    }
    dir("seat_height", &mut |v| {
        for (l, _, _) in legs {
            v[s(l, 1)] = 2.0;
            v[t(l, 1)] = 1.0;
        }
        for p in [seat, back, arms[0], arms[1]] {
            v[t(p, 1)] = 2.0;
        }
    });
    dir("width", &mut |v| {
        v[s(seat, 0)] = 2.0;
        v[s(back, 0)] = 2.0;
        for (l, sx, _) in legs {
            v[t(l, 0)] = sx;
        }
        for (a, side) in arms.iter().zip(arm_side) {
            v[t(*a, 0)] = side;
        }
    });
    dir("depth", &mut |v| {
        v[s(seat, 2)] = 2.0;
        v[t(back, 2)] = -1.0;
        for (l, _, sz) in legs {
            v[t(l, 2)] = sz;
        }
        for a in arms {
            v[s(a, 2)] = 2.0;
        }
    });
    dir("back_height", &mut |v| {
        v[s(back, 1)] = 2.0;
        v[t(back, 1)] = 1.0;
    });
    dir("arm_height", &mut |v| {
        for a in arms {
            v[s(a, 1)] = 2.0;
            v[t(a, 1)] = 1.0;
        }
    });
    // legs and arms thicken inward from the chair's outline
    dir("frame_thickness", &mut |v| {
        for (l, sx, sz) in legs {
            v[s(l, 0)] = 2.0;
            v[s(l, 2)] = 2.0;
            v[t(l, 0)] = -sx;
            v[t(l, 2)] = -sz;
        }
        for (a, side) in arms.iter().zip(arm_side) {
            v[s(*a, 0)] = 2.0;
            v[t(*a, 0)] = -side;
        }
    });
    // seat grows downward, legs shorten to match
    dir("seat_thickness", &mut |v| {
        v[s(seat, 1)] = 2.0;
        v[t(seat, 1)] = -1.0;
        for (l, _, _) in legs {
            v[s(l, 1)] = -2.0;
            v[t(l, 1)] = -1.0;
        }
    });
    // back grows forward, arms shorten to match
    dir("back_thickness", &mut |v| {
        v[s(back, 2)] = 2.0;
        v[t(back, 2)] = 1.0;
        for a in arms {
            v[s(a, 2)] = -2.0;
            v[t(a, 2)] = 1.0;
        }
    });
    out
}

/// Variation recipes for the chair fixture: weights on
/// [`chair_edit_directions`].
pub const CHAIR_VARIATIONS: [(&str, &[(&str, f64)]); 8] = [
    (
        "bar_stool",
        &[
            ("seat_height", 0.2),
            ("frame_thickness", 0.01),
            ("width", -0.04),
        ],
    ),
    (
        "lounge",
        &[
            ("seat_height", -0.1),
            ("depth", 0.08),
            ("back_height", -0.06),
            ("arm_height", -0.03),
            ("seat_thickness", -0.01),
        ],
    ),
    (
        "throne",
        &[
            ("back_height", 0.25),
            ("width", 0.06),
            ("arm_height", 0.05),
            ("back_thickness", 0.03),
        ],
    ),
    (
        "bench",
        &[
            ("width", 0.3),
            ("back_height", -0.1),
            ("seat_thickness", 0.02),
        ],
    ),
    (
        "sturdy",
        &[
            ("frame_thickness", 0.025),
            ("seat_thickness", 0.035),
            ("back_thickness", 0.015),
            ("move_x", 0.1),
        ],
    ),
    (
        "compact",
        &[
            ("width", -0.08),
            ("depth", -0.06),
            ("seat_height", -0.05),
            ("move_z", -0.05),
        ],
    ),
    (
        "deep",
        &[("depth", 0.15), ("arm_height", 0.08), ("move_y", 0.02)],
    ),
    (
        "tall_back",
        &[
            ("back_height", 0.15),
            ("seat_height", 0.05),
            ("frame_thickness", -0.01),
            ("back_thickness", -0.01),
        ],
    ),
];

/// Noise of the shipped chair variations, as a fraction of the diagonal.
pub const CHAIR_SIGMA: f64 = 0.001;
pub const CHAIR_SEED: u64 = 7;

/// The synthetic spec behind the shipped chair variations. Ground truth is
/// every pool constraint that all edit directions preserve.
pub fn chair_spec(pool: &CandidatePool) -> Result<SyntheticSpec> {
    let m = chair();
    let dirs = chair_edit_directions();
    let ground_truth: Vec<usize> = (0..pool.len())
        .filter(|&i| {
            dirs.iter()
                .all(|(_, v)| pool.constraints[i].violation(v) < 1e-12)
        })
        .collect();
    let sub = ground_truth_subspace(&m, pool, &ground_truth)?;
    let variations = CHAIR_VARIATIONS
        .iter()
        .map(|(label, recipe)| {
            let mut delta = vec![0.0; m.dim()];
            for (name, w) in recipe.iter() {
                let (_, v) = dirs
                    .iter()
                    .find(|(n, _)| n == name)
                    .expect("known direction");
                for (a, b) in delta.iter_mut().zip(v) {
                    *a += w * b;
                }
            }
            SyntheticOffset {
                label: label.to_string(),
                offset: sub.reduce(&delta).iter().copied().collect(),
            }
        })
        .collect();
    Ok(SyntheticSpec {
        ground_truth,
        variations,
        sigma: CHAIR_SIGMA,
        seed: CHAIR_SEED,
    })
}

/// Chair variations with whole parts collapsed to a sliver: a stool with
/// no arms, and a backless seat with neither arms nor back. The scale of a
/// collapsed part is `1e-6` on every axis.
pub fn chair_part_variations() -> VariationSet {
    let m = chair();
    let x0 = m.flatten();
    let collapse = |parts: &[usize]| {
        let mut x = x0.clone();
        for &p in parts {
            for a in 0..3 {
                x[m.scale_index(p, a)] = 1e-6;
            }
        }
        x
    };
    VariationSet::new(
        x0.clone(),
        vec![
            Variation::new("armchair", x0.clone()),
            Variation::new("stool", collapse(&[6, 7])),
            Variation::new("backless", collapse(&[1, 6, 7])),
        ],
    )
    .expect("bundled part variations are valid")
}

/// All bundled models by name.
pub fn all() -> Vec<(&'static str, Model)> {
    vec![
        ("bottle", bottle()),
        ("camera", camera()),
        ("chair", chair()),
        ("table", table()),
        ("car", car()),
    ]
}

pub fn by_name(name: &str) -> Option<Model> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let dims: Vec<_> = all().iter().map(|(_, m)| m.dim()).collect();
        assert_eq!(dims, vec![19, 24, 48, 36, 42]);
    }

    #[test]
    fn chair_directions_span_the_ground_truth() {
        use crate::constraints::enumerate_candidates;
        let m = chair();
        let pool = enumerate_candidates(&m, &m.flatten(), 1e-5).unwrap();
        let spec = chair_spec(&pool).unwrap();
        let sub = ground_truth_subspace(&m, &pool, &spec.ground_truth).unwrap();
        assert_eq!(sub.rank(), 37);
        assert_eq!(sub.nullity(), 11);
        for (name, v) in chair_edit_directions() {
            assert!(sub.residual(&v) < 1e-12, "{name}");
        }
    }
}
