//! The manipulation space: semantic sliders that blend projected variations,
//! bounded sliders on the free variables of the constraint subspace, and
//! toggles for optional primitive groups.

use serde::{Deserialize, Serialize};

use crate::constraints::{rows_of, SemanticConstraint};
use crate::csg::{Model, ParamVector};
use crate::discovery::{DiscreteGroups, ProjectionMethod, Projector, VariationSet};
use crate::error::{invalid, Error, Result};
use crate::numeric::{nullspace, Subspace};

/// Residual above which a vector is considered off the subspace.
pub const SUBSPACE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticSlider {
    pub label: String,
    /// The projected variation.
    pub target: ParamVector,
    /// `target - base`
    pub delta: ParamVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeVariable {
    /// Parameter index in the flattened vector.
    pub index: usize,
    pub label: String,
    pub base: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FreeVariable {
    fn tolerance(&self) -> f64 {
        1e-9 * self.lo.abs().max(self.hi.abs()).max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupToggle {
    pub name: String,
    pub primitives: Vec<usize>,
    pub default_on: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManipulationSpace {
    pub model: Model,
    pub method: ProjectionMethod,
    pub constraints: Vec<SemanticConstraint>,
    pub subspace: Subspace,
    /// The projected base parameters.
    pub base: ParamVector,
    pub sliders: Vec<SemanticSlider>,
    pub free: Vec<FreeVariable>,
    pub groups: Vec<GroupToggle>,
    /// Whether free offsets are clamped to the variation extremes.
    pub bounded: bool,
}

/// Slider positions. Weights and offsets are clamped on evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulationState {
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
    pub toggles: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub params: ParamVector,
    /// Per primitive; false for members of toggled-off groups.
    pub visible: Vec<bool>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsCheck {
    pub inside: bool,
    pub reason: Option<String>,
}

/// Projects the base and every variation onto the subspace of
/// `constraints` and records the slider ranges they span.
pub fn build_space(
    model: &Model,
    vars: &VariationSet,
    constraints: Vec<SemanticConstraint>,
    groups: &DiscreteGroups,
    projector: &Projector,
    bounded: bool,
) -> Result<ManipulationSpace> {
    vars.validate(model)?;
    let d = model.dim();
    let subspace = nullspace(&rows_of(constraints.iter(), d));

    let mut inputs: Vec<&[f64]> = vec![&vars.base];
    inputs.extend(vars.variations.iter().map(|v| &v.params[..]));
    let prepared = projector.prepare(inputs)?;
    let projected = projector.project(&prepared, &subspace)?;
    let mut projected = projected.into_iter().enumerate().map(|(k, p)| {
        p.ok_or_else(|| {
            let label = if k == 0 {
                "base"
            } else {
                vars.variations[k - 1].label.as_str()
            };
            Error::Infeasible(format!("variation {label:?} has no feasible projection"))
        })
    });
    let base = projected.next().expect("base is always projected")?;
    let mut sliders = Vec::with_capacity(vars.len());
    for (v, target) in vars.variations.iter().zip(projected) {
        let target = target?;
        let delta: Vec<f64> = target.iter().zip(base.iter()).map(|(a, b)| a - b).collect();
        sliders.push(SemanticSlider {
            label: v.label.clone(),
            target,
            delta: delta.into(),
        });
    }

    let free = subspace
        .free
        .iter()
        .map(|&j| {
            let values = std::iter::once(base[j]).chain(sliders.iter().map(|s| s.target[j]));
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            FreeVariable {
                index: j,
                label: model.index_label(j),
                base: base[j],
                lo,
                hi,
            }
        })
        .collect();

    let groups = groups
        .groups
        .iter()
        .map(|g| GroupToggle {
            name: g.names.join("+"),
            primitives: g.primitives.clone(),
            default_on: true,
        })
        .collect();

    Ok(ManipulationSpace {
        model: model.clone(),
        method: projector.method(),
        constraints,
        subspace,
        base,
        sliders,
        free,
        groups,
        bounded,
    })
}

impl ManipulationSpace {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn free_dims(&self) -> usize {
        self.free.len()
    }

    /// All weights and offsets zero, groups at their defaults.
    pub fn neutral_state(&self) -> ManipulationState {
        ManipulationState {
            weights: vec![0.0; self.sliders.len()],
            offsets: vec![0.0; self.free.len()],
            toggles: self.groups.iter().map(|g| g.default_on).collect(),
        }
    }

    /// State selecting one semantic slider at full weight.
    pub fn variation_state(&self, label: &str) -> Option<ManipulationState> {
        let i = self.sliders.iter().position(|s| s.label == label)?;
        let mut state = self.neutral_state();
        state.weights[i] = 1.0;
        Some(state)
    }

    pub fn check_state(&self, state: &ManipulationState) -> Result<()> {
        for (got, expected) in [
            (state.weights.len(), self.sliders.len()),
            (state.offsets.len(), self.free.len()),
            (state.toggles.len(), self.groups.len()),
        ] {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        if state
            .weights
            .iter()
            .chain(&state.offsets)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("state values must be finite"));
        }
        Ok(())
    }

    /// Visibility per primitive under the state's toggles.
    pub fn visibility(&self, toggles: &[bool]) -> Vec<bool> {
        let mut visible = vec![true; self.model.primitive_count()];
        for (g, &on) in self.groups.iter().zip(toggles) {
            if !on {
                for &p in &g.primitives {
                    visible[p] = false;
                }
            }
        }
        visible
    }

    /// Evaluates a state: `base + blend(weights) + N * offsets`, where the
    /// blend is divided by the total weight once it exceeds one.
    pub fn evaluate(&self, state: &ManipulationState) -> Result<Evaluation> {
        self.check_state(state)?;
        let mut warnings = Vec::new();
        let weights: Vec<f64> = state
            .weights
            .iter()
            .zip(&self.sliders)
            .map(|(&w, s)| {
                let c = w.clamp(0.0, 1.0);
                if c != w {
                    warnings.push(format!("weight {} clamped from {w} to {c}", s.label));
                }
                c
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let norm = if total > 1.0 { total } else { 1.0 };

        let mut x: Vec<f64> = self.base.to_vec();
        for (w, s) in weights.iter().zip(&self.sliders) {
            if *w == 0.0 {
                continue;
            }
            for (xi, di) in x.iter_mut().zip(s.delta.iter()) {
                *xi += w / norm * di;
            }
        }

        for (k, (fv, &off)) in self.free.iter().zip(&state.offsets).enumerate() {
            let at = x[fv.index];
            let mut want = at + off;
            let tol = fv.tolerance();
            if self.bounded && (want < fv.lo - tol || want > fv.hi + tol) {
                let c = want.clamp(fv.lo, fv.hi);
                warnings.push(format!(
                    "offset {} clamped: {want} outside [{}, {}]",
                    fv.label, fv.lo, fv.hi
                ));
                want = c;
            }
            let eff = want - at;
            if eff != 0.0 {
                for (xi, n) in x.iter_mut().zip(self.subspace.basis.column(k).iter()) {
                    *xi += eff * n;
                }
            }
        }

        Ok(Evaluation {
            params: x.into(),
            visible: self.visibility(&state.toggles),
            warnings,
        })
    }

    /// Whether `x` is reachable: on the subspace, and with every free
    /// variable inside its bounds when bounds are on.
    pub fn bounds_check(&self, x: &[f64]) -> Result<BoundsCheck> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.subspace.residual(x) > SUBSPACE_TOLERANCE {
            return Ok(BoundsCheck {
                inside: false,
                reason: Some("violates constraints".into()),
            });
        }
        if self.bounded {
            for fv in &self.free {
                let v = x[fv.index];
                let tol = fv.tolerance();
                if v < fv.lo - tol || v > fv.hi + tol {
                    return Ok(BoundsCheck {
                        inside: false,
                        reason: Some(format!("{} = {v} outside [{}, {}]", fv.label, fv.lo, fv.hi)),
                    });
                }
            }
        }
        Ok(BoundsCheck {
            inside: true,
            reason: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::enumerate_candidates;
    use crate::csg::Primitive;
    use crate::discovery::{DiscoveryConfig, Variation};

    fn stacked() -> Model {
        Model::new(
            "stack",
            vec![
                Primitive::cube("lower", [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
                Primitive::cube("upper", [0.0, 1.0, 0.0], [1.0, 1.0, 1.0]),
            ],
        )
        .unwrap()
    }

    fn space(vars: &VariationSet, labels: &[&str]) -> ManipulationSpace {
        let m = stacked();
        let pool = enumerate_candidates(&m, &vars.base, 1e-5).unwrap();
        let cons = labels
            .iter()
            .map(|l| pool.constraints[pool.position(l).unwrap()].clone())
            .collect();
        let cfg = DiscoveryConfig::default();
        let proj = Projector::from_config(&m, &vars.base, &cfg).unwrap();
        build_space(&m, vars, cons, &DiscreteGroups::empty(1e-4), &proj, true).unwrap()
    }

    fn two_variations() -> VariationSet {
        let m = stacked();
        let x0 = m.flatten();
        let mut a = x0.clone();
        a[4] = 1.4;
        a[1] = 0.2;
        a[7] = 1.4;
        let mut b = x0.clone();
        b[9] = 0.6;
        VariationSet::new(x0, vec![Variation::new("a", a), Variation::new("b", b)]).unwrap()
    }

    #[test]
    fn identical_variations_give_point_bounds() {
        let m = stacked();
        let x0 = m.flatten();
        let vars = VariationSet::new(x0.clone(), vec![Variation::new("same", x0.clone())]).unwrap();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        assert!(s.sliders[0].delta.iter().all(|&v| v == 0.0));
        assert!(s.free.iter().all(|f| f.lo == f.hi));
    }

    #[test]
    fn evaluate_rules() {
        let vars = two_variations();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        let neutral = s.evaluate(&s.neutral_state()).unwrap();
        assert_eq!(neutral.params, s.base);
        let one = s.evaluate(&s.variation_state("a").unwrap()).unwrap();
        assert!(one.params.max_abs_diff(&s.sliders[0].target) < 1e-12);
        let mut both = s.neutral_state();
        both.weights = vec![1.0, 1.0];
        let mid = s.evaluate(&both).unwrap().params;
        for j in 0..s.dim() {
            let want = s.base[j] + 0.5 * (s.sliders[0].delta[j] + s.sliders[1].delta[j]);
            assert!((mid[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_free_difference_moves_one_reduced_coordinate() {
        let vars = two_variations();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        let d = &s.sliders[1].delta;
        let moved: Vec<_> = s.free.iter().filter(|f| d[f.index] != 0.0).collect();
        assert_eq!(moved.len(), 1);
        assert_eq!(moved[0].label, "upper.sx");
    }

    #[test]
    fn offsets_clamp_and_warn() {
        let vars = two_variations();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        let k = s.free.iter().position(|f| f.label == "upper.sx").unwrap();
        let mut st = s.neutral_state();
        st.offsets[k] = -10.0;
        let e = s.evaluate(&st).unwrap();
        assert_eq!(e.params[9], s.free[k].lo);
        assert_eq!(e.warnings.len(), 1);
        assert!(s.subspace.residual(&e.params) < 1e-12);
    }

    #[test]
    fn variation_states_evaluate_without_warnings() {
        let vars = two_variations();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        for sl in &s.sliders {
            let e = s.evaluate(&s.variation_state(&sl.label).unwrap()).unwrap();
            assert!(e.warnings.is_empty(), "{:?}", e.warnings);
        }
    }

    #[test]
    fn bounds_check_cases() {
        let vars = two_variations();
        let s = space(&vars, &["coplanar(lower.+y, upper.-y)"]);
        assert!(s.bounds_check(&s.base).unwrap().inside);
        for sl in &s.sliders {
            assert!(s.bounds_check(&sl.target).unwrap().inside);
        }
        let f = s.free.iter().find(|f| f.hi > f.lo).unwrap();
        let mut x = s.base.clone();
        let k = s.free.iter().position(|g| g.index == f.index).unwrap();
        let step = 2.0 * (f.hi - f.lo) + (f.hi - x[f.index]);
        for (xi, n) in x.iter_mut().zip(s.subspace.basis.column(k).iter()) {
            *xi += step * n;
        }
        assert!(!s.bounds_check(&x).unwrap().inside);
        let mut off = s.base.clone();
        off[1] += 0.5;
        let r = s.bounds_check(&off).unwrap();
        assert_eq!(r.reason.as_deref(), Some("violates constraints"));
    }

    #[test]
    fn toggles_only_change_visibility() {
        let m = stacked();
        let x0 = m.flatten();
        let vars = VariationSet::new(x0.clone(), vec![Variation::new("same", x0.clone())]).unwrap();
        let groups = crate::discovery::group_optional(&m, &vars, vec![vec![1.0, 0.0]], 1e-4);
        let cfg = DiscoveryConfig::default();
        let proj = Projector::from_config(&m, &x0, &cfg).unwrap();
        let s = build_space(&m, &vars, vec![], &groups, &proj, true).unwrap();
        let mut st = s.neutral_state();
        let on = s.evaluate(&st).unwrap();
        st.toggles[0] = false;
        let off = s.evaluate(&st).unwrap();
        assert_eq!(on.params, off.params);
        assert_eq!(off.visible, vec![true, false]);
        st.toggles.push(true);
        assert!(matches!(
            s.evaluate(&st),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
