//! Monte-Carlo volumetric intersection over union.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csg::{Aabb, Model, PrimitiveKind, Solid};
use crate::error::{invalid, Error, Result};
use crate::par;

pub const MIN_SAMPLES: usize = 1000;
/// Samples used while ranking constraints.
pub const RANKING_SAMPLES: usize = 200_000;
/// Samples used for reported scores.
pub const REPORT_SAMPLES: usize = 1_000_000;

const CHUNK: usize = 8192;

/// IoU of the shapes `model(xa)` and `model(xb)`, estimated from `samples`
/// uniform points in the union of their bounding boxes. Both shapes are
/// tested on the same points, so identical inputs give exactly 1.
pub fn iou(model: &Model, xa: &[f64], xb: &[f64], samples: usize, seed: u64) -> Result<f64> {
    for x in [xa, xb] {
        if x.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: x.len(),
            });
        }
    }
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("iou needs at least {MIN_SAMPLES} samples")));
    }
    let a = Solid::new(model, xa);
    let b = Solid::new(model, xb);
    let bounds = model.aabb(xa).union(&model.aabb(xb));
    Ok(solid_iou(&a, &b, &bounds, samples, seed))
}

/// IoU of two prepared solids sampled inside `bounds`, which must contain both.
pub fn solid_iou(a: &Solid, b: &Solid, bounds: &Aabb, samples: usize, seed: u64) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let chunks = samples.div_ceil(CHUNK);
    let counts = par::map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let n = CHUNK.min(samples - c * CHUNK);
        let (mut inter, mut union) = (0u64, 0u64);
        for _ in 0..n {
            let p = [0, 1, 2].map(|k| {
                let u: f64 = rng.gen();
                bounds.min[k] + u * (bounds.max[k] - bounds.min[k])
            });
            let (ia, ib) = (a.contains(p), b.contains(p));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
        (inter, union)
    });
    let (inter, union) = counts
        .into_iter()
        .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Exact IoU for models made only of cubes (at most 64), computed on the
/// grid spanned by every box face. Returns `None` for other models.
pub fn box_iou(model: &Model, xa: &[f64], xb: &[f64]) -> Option<f64> {
    let n = model.primitive_count();
    if n > 64
        || model
            .primitives
            .iter()
            .any(|p| p.kind != PrimitiveKind::Cube)
    {
        return None;
    }
    if xa.len() != model.dim() || xb.len() != model.dim() {
        return None;
    }
    let offsets = model.offsets();
    let boxes: Vec<(u128, [f64; 3], [f64; 3])> = [xa, xb]
        .iter()
        .enumerate()
        .flat_map(|(side, x)| {
            let offsets = &offsets;
            (0..n).map(move |p| {
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for a in 0..3 {
                    let t = x[offsets[p] + a];
                    let s = x[offsets[p] + 3 + a];
                    lo[a] = t - 0.5 * s;
                    hi[a] = t + 0.5 * s;
                }
                (1u128 << (p + 64 * side), lo, hi)
            })
        })
        .collect();

    // per axis: cell widths and the set of boxes covering each cell
    let axes: Vec<(Vec<f64>, Vec<u128>)> = (0..3)
        .map(|a| {
            let mut cuts: Vec<f64> = boxes.iter().flat_map(|b| [b.1[a], b.2[a]]).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2)
                .map(|w| {
                    let mask = boxes
                        .iter()
                        .filter(|b| b.1[a] <= w[0] && b.2[a] >= w[1])
                        .fold(0u128, |m, b| m | b.0);
                    (w[1] - w[0], mask)
                })
                .unzip()
        })
        .collect();

    let lower = u64::MAX as u128;
    let (mut inter, mut union) = (0.0, 0.0);
    for (wx, mx) in axes[0].0.iter().zip(&axes[0].1) {
        for (wy, my) in axes[1].0.iter().zip(&axes[1].1) {
            let mxy = mx & my;
            if mxy == 0 {
                continue;
            }
            let area = wx * wy;
            for (wz, mz) in axes[2].0.iter().zip(&axes[2].1) {
                let m = mxy & mz;
                let (ia, ib) = (m & lower != 0, m >> 64 != 0);
                if ia || ib {
                    let v = area * wz;
                    union += v;
                    if ia && ib {
                        inter += v;
                    }
                }
            }
        }
    }
    Some(if union > 0.0 { inter / union } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::Primitive;

    fn cube() -> Model {
        Model::new("t", vec![Primitive::cube("c", [0.0; 3], [1.0; 3])]).unwrap()
    }

    #[test]
    fn identical_shapes_score_one() {
        let m = cube();
        let x = m.flatten();
        assert_eq!(iou(&m, &x, &x, 5000, 3).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_shapes_score_zero() {
        let m = cube();
        let a = m.flatten();
        let mut b = a.clone();
        b[0] = 2.0;
        assert_eq!(iou(&m, &a, &b, 5000, 3).unwrap(), 0.0);
    }

    #[test]
    fn half_overlap() {
        let m = cube();
        let a = m.flatten();
        let mut b = a.clone();
        b[0] = 0.5;
        let v = iou(&m, &a, &b, REPORT_SAMPLES, 11).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn exact_boxes_match_sampling() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cube("b", [0.6, 0.2, 0.0], [1.0, 0.5, 2.0]),
            ],
        )
        .unwrap();
        let a = m.flatten();
        let mut b = a.clone();
        b[0] = 0.3;
        b[10] = 0.4;
        let exact = box_iou(&m, &a, &b).unwrap();
        let sampled = iou(&m, &a, &b, REPORT_SAMPLES, 2).unwrap();
        assert!((exact - sampled).abs() < 0.01, "{exact} {sampled}");
        assert_eq!(box_iou(&m, &a, &a), Some(1.0));
        let half = Model::new("h", vec![Primitive::cube("a", [0.0; 3], [1.0; 3])]).unwrap();
        let v = box_iou(
            &half,
            &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            &[0.5, 0.0, 0.0, 1.0, 1.0, 1.0],
        );
        assert!((v.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_validated() {
        let m = cube();
        let a = m.flatten();
        let mut b = a.clone();
        b[4] = 1.7;
        assert_eq!(
            iou(&m, &a, &b, 20_000, 5).unwrap(),
            iou(&m, &a, &b, 20_000, 5).unwrap()
        );
        assert!(iou(&m, &a, &b, 999, 5).is_err());
    }
}
