//! Projection of parameter vectors onto a constraint subspace.

use nalgebra::{DMatrix, DVector};

use super::descent::{descend, DescentConfig, DescentReport};
use super::lstsq::LeastSquares;
use super::nullspace::Subspace;
use crate::csg::{FaceMap, Model};
use crate::error::{invalid, Error, Result};
use crate::raster::{mse, render, RenderTarget};

/// Weighted face-shift projection.
///
/// Solves `min_y |A Q (N y - x)|^2` in one least-squares solve, taking the
/// minimum-norm `y` when `A Q N` is rank deficient. Parameters that no face
/// depends on (`r_top`) are copied from `x` when they are unconstrained.
pub fn project_alg1(fm: &FaceMap, sub: &Subspace, x: &[f64]) -> Result<DVector<f64>> {
    FaceProjection::new(fm, sub)?.project(x)
}

/// A factored face-weighted projection onto one subspace, reusable across
/// many inputs.
pub struct FaceProjection<'a> {
    fm: &'a FaceMap,
    sub: &'a Subspace,
    aq: DMatrix<f64>,
    aqn: DMatrix<f64>,
    solver: Option<LeastSquares>,
    passthrough: Vec<usize>,
}

impl<'a> FaceProjection<'a> {
    pub fn new(fm: &'a FaceMap, sub: &'a Subspace) -> Result<Self> {
        if sub.dim() != fm.dim {
            return Err(Error::DimensionMismatch {
                expected: fm.dim,
                got: sub.dim(),
            });
        }
        let aq = fm.weighted_q();
        let aqn = &aq * &sub.basis;
        let solver = if sub.nullity() > 0 {
            Some(LeastSquares::new(&aqn, 1e-12)?)
        } else {
            None
        };
        let passthrough = fm
            .passthrough_indices()
            .into_iter()
            .filter(|&j| {
                sub.constraints.column(j).iter().all(|v| *v == 0.0) && sub.free.contains(&j)
            })
            .collect();
        Ok(FaceProjection {
            fm,
            sub,
            aq,
            aqn,
            solver,
            passthrough,
        })
    }

    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.fm.dim {
            return Err(Error::DimensionMismatch {
                expected: self.fm.dim,
                got: x.len(),
            });
        }
        let mut out = match &self.solver {
            None => DVector::zeros(self.fm.dim),
            Some(ls) => {
                let rhs = &self.aq * DVector::from_column_slice(x);
                let mut y = ls.solve(&rhs)?;
                // face weights span several decades, so refine once
                y += ls.solve(&(&rhs - &self.aqn * &y))?;
                self.sub.expand(&y)
            }
        };
        for &j in &self.passthrough {
            out[j] = x[j];
        }
        for r in &self.fm.rows {
            if !(out[r.scale_index] > 0.0) {
                return Err(Error::Infeasible(format!(
                    "scale parameter {} became {}",
                    r.scale_index, out[r.scale_index]
                )));
            }
        }
        Ok(out)
    }
}

/// Image-space projection.
///
/// Starts from the Euclidean-nearest point of the subspace and runs
/// finite-difference descent on the reduced coordinates against the
/// targets' plain per-pixel squared error. The result is never worse than
/// that starting point.
pub fn project_alg2(
    model: &Model,
    sub: &Subspace,
    x: &[f64],
    targets: &[RenderTarget],
    config: &DescentConfig,
) -> Result<DescentReport> {
    config.validate()?;
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    if targets.is_empty() {
        return Err(invalid("need at least one render target"));
    }
    let size = targets[0].image.width;
    let scale_ref = model.bbox_diagonal(&model.flatten());
    let y0 = if sub.residual(x) < 1e-12 {
        sub.reduce(x)
    } else {
        sub.nearest_reduced(x)
    };
    let guard = ParamGuard::new(model, scale_ref);
    let loss = |y: &DVector<f64>| -> Result<f64> {
        let xs = guard.apply(sub.expand(y).as_slice());
        let mut total = 0.0;
        for t in targets {
            total += mse(&render(model, &xs, &t.camera, size)?, &t.image)?;
        }
        Ok(total)
    };
    let mut report = descend(y0, scale_ref, config, loss)?;
    report.params = guard.apply(sub.expand(&report.params).as_slice()).into();
    Ok(report)
}

/// Keeps rendered parameters valid: scales are clamped to a small positive
/// floor and top radii to [0, 1].
pub(crate) struct ParamGuard {
    scales: Vec<usize>,
    radii: Vec<usize>,
    floor: f64,
}

impl ParamGuard {
    pub(crate) fn new(model: &Model, scale_ref: f64) -> Self {
        ParamGuard {
            scales: model.scale_indices(),
            radii: model.top_radius_indices(),
            floor: 1e-4 * scale_ref,
        }
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for &i in &self.scales {
            if !(out[i] >= self.floor) {
                out[i] = self.floor;
            }
        }
        for &i in &self.radii {
            out[i] = out[i].clamp(0.0, 1.0);
        }
        out
    }
}

impl FaceMap {
    /// Parameters no face row depends on.
    pub fn passthrough_indices(&self) -> Vec<usize> {
        let mut used = vec![false; self.dim];
        for r in &self.rows {
            used[r.translation_index] = true;
            used[r.scale_index] = true;
        }
        (0..self.dim).filter(|&j| !used[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::csg::{face_map, Primitive};
    use crate::numeric::nullspace::nullspace;

    /// Dense KKT solve of `min (x - x0)' B (x - x0)` s.t. `C x = 0`.
    fn kkt(fm: &FaceMap, c: &DMatrix<f64>, x0: &[f64]) -> DVector<f64> {
        let aq = fm.weighted_q();
        let b = aq.transpose() * &aq;
        let d = fm.dim;
        let m = c.nrows();
        let mut k = DMatrix::zeros(d + m, d + m);
        k.view_mut((0, 0), (d, d)).copy_from(&(&b * 2.0));
        k.view_mut((0, d), (d, m)).copy_from(&c.transpose());
        k.view_mut((d, 0), (m, d)).copy_from(c);
        let mut rhs = DVector::zeros(d + m);
        rhs.rows_mut(0, d)
            .copy_from(&(&b * DVector::from_column_slice(x0) * 2.0));
        let sol = LeastSquares::new(&k, 1e-12).unwrap().solve(&rhs).unwrap();
        sol.rows(0, d).into_owned()
    }

    #[test]
    fn feasible_input_unchanged() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cube("b", [0.0, 1.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap();
        let fm = face_map(&m);
        let mut c = DMatrix::zeros(1, 12);
        // a.+y == b.-y
        c[(0, 1)] = 1.0;
        c[(0, 4)] = 0.5;
        c[(0, 7)] = -1.0;
        c[(0, 10)] = 0.5;
        let s = nullspace(&c);
        let x = m.flatten();
        let p = project_alg1(&fm, &s, &x).unwrap();
        assert!(p.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn equal_scale_constraint_matches_kkt() {
        let m = Model::new("t", vec![Primitive::cube("a", [0.0; 3], [3.0, 1.0, 3.0])]).unwrap();
        let fm = face_map(&m);
        let mut c = DMatrix::zeros(1, 6);
        c[(0, 3)] = 1.0;
        c[(0, 5)] = -1.0;
        let s = nullspace(&c);
        let x = [0.0, 0.0, 0.0, 2.0, 1.0, 4.0];
        let p = project_alg1(&fm, &s, &x).unwrap();
        let oracle = kkt(&fm, &c, &x);
        assert!((&p - &oracle).amax() < 1e-9, "{p} vs {oracle}");
        // symmetric weights put the result at the midpoint
        assert!((p[3] - 3.0).abs() < 1e-9 && (p[5] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn coplanar_translations_move_by_inverse_weight() {
        // big and small cube whose +x faces should be coplanar
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("big", [0.0; 3], [1.0, 2.0, 2.0]),
                Primitive::cube("small", [0.0, 3.0, 0.0], [1.0; 3]),
            ],
        )
        .unwrap();
        let fm = face_map(&m);
        let mut c = DMatrix::zeros(1, 12);
        c[(0, 0)] = 1.0;
        c[(0, 3)] = 0.5;
        c[(0, 6)] = -1.0;
        c[(0, 9)] = -0.5;
        let s = nullspace(&c);
        let mut x = m.flatten();
        x[6] = 0.3;
        let p = project_alg1(&fm, &s, &x).unwrap();
        let oracle = kkt(&fm, &c, &x);
        assert!((&p - &oracle).amax() < 1e-9);
        assert!(s.residual(p.as_slice()) < 1e-9);
        // the small cube's face is cheaper to move
        let big_shift = (p[0] + 0.5 * p[3]) - 0.5;
        let small_shift = (p[6] + 0.5 * p[9]) - 0.8;
        assert!(small_shift.abs() > big_shift.abs());
    }

    #[test]
    fn top_radius_passes_through() {
        let m = Model::new(
            "t",
            vec![
                Primitive::cube("a", [0.0; 3], [1.0; 3]),
                Primitive::cone("b", [0.0, 1.0, 0.0], [1.0; 3], 0.4),
            ],
        )
        .unwrap();
        let fm = face_map(&m);
        assert_eq!(fm.passthrough_indices(), vec![12]);
        let s = Subspace::full(13);
        let mut x = m.flatten();
        x[12] = 0.7;
        let p = project_alg1(&fm, &s, &x).unwrap();
        assert!((p[12] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn collapsing_projection_is_infeasible() {
        let m = Model::new("t", vec![Primitive::cube("a", [0.0; 3], [1.0; 3])]).unwrap();
        let fm = face_map(&m);
        let s = nullspace(&DMatrix::identity(6, 6));
        let err = project_alg1(&fm, &s, &m.flatten()).unwrap_err();
        assert!(err.to_string().contains("projection left feasible region"));
    }
}
