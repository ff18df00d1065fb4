//! Constraint discovery: greedy ranking of candidate constraints by how much
//! projecting the variations onto them distorts the shapes, a change-point
//! cutoff on the pixel distortion curve, and optional-part discovery.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{
    enumerate_candidates, rows_of, CandidatePool, ConstraintKind, SemanticConstraint,
    DEFAULT_EPS_REL,
};
use crate::csg::{face_map, FaceMap, Model, ParamVector};
use crate::error::{invalid, Error, Result};
use crate::numeric::iou::RANKING_SAMPLES;
use crate::numeric::project::ParamGuard;
use crate::numeric::{
    box_iou, iou, nullspace, project_alg2, rref, DescentConfig, FaceProjection, Subspace,
};
use crate::par;
use crate::raster::{
    mse, render, render_visible, sample_cameras, Camera, Image, RenderTarget, DEFAULT_CAMERAS,
    DEFAULT_SIZE,
};

/// Per-pixel loss below which a removed primitive counts as optional.
pub const DEFAULT_DISCRETE_THRESHOLD: f64 = 1e-4;

/// Distortion charged for a variation whose projection is infeasible.
/// Pixel values lie in [0, 1], so no feasible projection can exceed it.
const INFEASIBLE_PIXEL_DISTORTION: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variation {
    pub label: String,
    pub params: ParamVector,
}

impl Variation {
    pub fn new(label: impl Into<String>, params: impl Into<ParamVector>) -> Self {
        Variation {
            label: label.into(),
            params: params.into(),
        }
    }
}

/// Labeled design variations of one base model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationSet {
    pub base: ParamVector,
    pub variations: Vec<Variation>,
}

impl VariationSet {
    pub fn new(base: ParamVector, variations: Vec<Variation>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &variations {
            if v.label.is_empty() {
                return Err(invalid("variation labels must be non-empty"));
            }
            if !seen.insert(v.label.as_str()) {
                return Err(invalid(format!("duplicate variation label {:?}", v.label)));
            }
            if v.params.len() != base.len() {
                return Err(Error::DimensionMismatch {
                    expected: base.len(),
                    got: v.params.len(),
                });
            }
        }
        Ok(VariationSet { base, variations })
    }

    /// Checks every vector against the model, naming the offending label.
    pub fn validate(&self, model: &Model) -> Result<()> {
        model.check_params(&self.base)?;
        for v in &self.variations {
            model.check_params(&v.params).map_err(|e| match e {
                Error::DimensionMismatch { .. } => e,
                other => invalid(format!("variation {:?}: {other}", v.label)),
            })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variations.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.variations.iter().map(|v| v.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.variations.iter().position(|v| v.label == label)
    }

    fn params(&self) -> Vec<&[f64]> {
        self.variations.iter().map(|v| &v.params[..]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// Weighted face-shift least squares, scored by volumetric IoU.
    Faces,
    /// Image-loss descent, scored by pixel error.
    Image,
}

impl ProjectionMethod {
    /// Face projection unless the model has primitives that change shape.
    pub fn for_model(model: &Model) -> Self {
        if face_map(model).alg1_unsound {
            ProjectionMethod::Image
        } else {
            ProjectionMethod::Faces
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Mean,
    Max,
}

impl Aggregate {
    fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Max => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscoveryConfig {
    pub eps_rel: f64,
    /// `None` picks [`ProjectionMethod::for_model`].
    pub method: Option<ProjectionMethod>,
    pub aggregate: Aggregate,
    pub iou_samples: usize,
    pub seed: u64,
    pub cameras: usize,
    /// Resolution of the pixel distortion curve and discrete discovery.
    pub render_size: usize,
    /// Resolution of image-space projection targets.
    pub image_size: usize,
    /// Descent used by image-space projection; `None` stops at the
    /// Euclidean-nearest seed.
    pub image_descent: Option<DescentConfig>,
    pub discrete_threshold: f64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            eps_rel: DEFAULT_EPS_REL,
            method: None,
            aggregate: Aggregate::Mean,
            iou_samples: RANKING_SAMPLES,
            seed: 0,
            cameras: DEFAULT_CAMERAS,
            render_size: DEFAULT_SIZE,
            image_size: 64,
            image_descent: Some(DescentConfig { iters: 2, lr: 0.05 }),
            discrete_threshold: DEFAULT_DISCRETE_THRESHOLD,
        }
    }
}

impl DiscoveryConfig {
    pub fn method_for(&self, model: &Model) -> ProjectionMethod {
        self.method
            .unwrap_or_else(|| ProjectionMethod::for_model(model))
    }

    pub fn cameras_for(&self, model: &Model, x0: &[f64]) -> Result<Vec<Camera>> {
        sample_cameras(self.seed, self.cameras, &model.aabb(x0))
    }
}

/// Maps parameter vectors onto constraint subspaces with one fixed method.
pub struct Projector<'a> {
    model: &'a Model,
    faces: FaceMap,
    method: ProjectionMethod,
    cameras: Vec<Camera>,
    image_size: usize,
    descent: Option<DescentConfig>,
    guard: ParamGuard,
}

/// Inputs prepared for repeated projection.
pub struct Prepared<'b> {
    inputs: Vec<&'b [f64]>,
    targets: Vec<Vec<RenderTarget>>,
}

impl<'a> Projector<'a> {
    pub fn new(
        model: &'a Model,
        method: ProjectionMethod,
        cameras: Vec<Camera>,
        image_size: usize,
        descent: Option<DescentConfig>,
    ) -> Result<Self> {
        if let Some(d) = &descent {
            d.validate()?;
        }
        if method == ProjectionMethod::Image && cameras.is_empty() {
            return Err(invalid("image projection needs at least one camera"));
        }
        let scale_ref = model.bbox_diagonal(&model.flatten());
        Ok(Projector {
            model,
            faces: face_map(model),
            method,
            cameras,
            image_size,
            descent,
            guard: ParamGuard::new(model, scale_ref),
        })
    }

    pub fn from_config(model: &'a Model, x0: &[f64], config: &DiscoveryConfig) -> Result<Self> {
        Projector::new(
            model,
            config.method_for(model),
            config.cameras_for(model, x0)?,
            config.image_size,
            config.image_descent,
        )
    }

    pub fn method(&self) -> ProjectionMethod {
        self.method
    }

    pub fn prepare<'b>(&self, inputs: Vec<&'b [f64]>) -> Result<Prepared<'b>> {
        let targets = match self.method {
            ProjectionMethod::Faces => vec![Vec::new(); inputs.len()],
            ProjectionMethod::Image => par::map(&inputs, |x| {
                crate::raster::render_targets(self.model, x, &self.cameras, self.image_size)
            })
            .into_iter()
            .collect::<Result<_>>()?,
        };
        Ok(Prepared { inputs, targets })
    }

    /// Projects every prepared input; `None` marks an infeasible result.
    pub fn project(&self, prepared: &Prepared, sub: &Subspace) -> Result<Vec<Option<ParamVector>>> {
        let scale = prepared
            .inputs
            .iter()
            .map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(1.0, f64::max);
        let settled = |x: &[f64]| sub.rank() == 0 || sub.residual(x) <= 1e-12 * scale;
        match self.method {
            ProjectionMethod::Faces => {
                let fp = FaceProjection::new(&self.faces, sub)?;
                prepared
                    .inputs
                    .iter()
                    .map(|x| {
                        if settled(x) {
                            return Ok(Some(ParamVector::new(x.to_vec())));
                        }
                        match fp.project(x) {
                            Ok(v) => Ok(Some(ParamVector::from_dvector(&v))),
                            Err(Error::Infeasible(_)) => Ok(None),
                            Err(e) => Err(e),
                        }
                    })
                    .collect()
            }
            ProjectionMethod::Image => prepared
                .inputs
                .iter()
                .zip(&prepared.targets)
                .map(|(x, targets)| {
                    if settled(x) {
                        return Ok(Some(ParamVector::new(x.to_vec())));
                    }
                    let out = match &self.descent {
                        Some(cfg) => project_alg2(self.model, sub, x, targets, cfg)?.params,
                        None => {
                            let y = sub.nearest_reduced(x);
                            DVector::from_vec(self.guard.apply(sub.expand(&y).as_slice()))
                        }
                    };
                    Ok(Some(ParamVector::from_dvector(&out)))
                })
                .collect(),
        }
    }

    /// Distortion of each input against its projection: `1 - IoU` for face
    /// projection, mean per-pixel error over cameras for image projection.
    fn distortions(
        &self,
        prepared: &Prepared,
        projected: &[Option<ParamVector>],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(projected.len());
        for (k, p) in projected.iter().enumerate() {
            let x = prepared.inputs[k];
            let Some(p) = p else {
                out.push(f64::INFINITY);
                continue;
            };
            if x == &p[..] {
                out.push(0.0);
                continue;
            }
            let v = match self.method {
                ProjectionMethod::Faces => {
                    let score = match box_iou(self.model, x, p) {
                        Some(v) => v,
                        None => iou(self.model, x, p, samples, seed)?,
                    };
                    1.0 - score
                }
                ProjectionMethod::Image => {
                    let targets = &prepared.targets[k];
                    let mut total = 0.0;
                    for t in targets {
                        total += mse(
                            &render(self.model, p, &t.camera, self.image_size)?,
                            &t.image,
                        )?;
                    }
                    total / targets.len() as f64
                }
            };
            out.push(v);
        }
        Ok(out)
    }
}

/// Tests whether constraint rows lie in the span of a chosen set.
struct RowSpan {
    rows: Vec<Vec<f64>>,
    pivots: Vec<usize>,
    d: usize,
}

impl RowSpan {
    fn new(c: &DMatrix<f64>) -> Self {
        let (rows, pivots) = rref(c);
        RowSpan {
            rows,
            pivots,
            d: c.ncols(),
        }
    }

    fn contains(&self, constraint: &SemanticConstraint) -> bool {
        constraint.rows.iter().all(|row| {
            let mut v = vec![0.0; self.d];
            for &(j, c) in row.coeffs() {
                v[j] = c;
            }
            for (r, &p) in self.rows.iter().zip(&self.pivots) {
                let f = v[p];
                if f != 0.0 {
                    for (a, b) in v.iter_mut().zip(r) {
                        *a -= f * b;
                    }
                }
            }
            v.iter().all(|a| a.abs() <= 1e-9)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pool_index: usize,
    pub label: String,
    /// Distortion of the prefix ending at this pick.
    pub score: f64,
    /// Running maximum of `score`.
    pub cumulative: f64,
}

/// A candidate whose rows were already spanned by the first `after` picks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpliedConstraint {
    pub pool_index: usize,
    pub label: String,
    pub after: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub method: ProjectionMethod,
    pub steps: Vec<TraceStep>,
    pub implied: Vec<ImpliedConstraint>,
    /// Candidates left when every remaining one made projection infeasible.
    pub unranked: Vec<usize>,
    /// Pixel distortion after each prefix of `steps`.
    pub pixel_curve: Vec<f64>,
    pub cutoff: usize,
}

impl GreedyTrace {
    /// Pool indices kept: the first `cutoff` picks, then every candidate they
    /// imply.
    pub fn selected(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.steps[..self.cutoff]
            .iter()
            .map(|s| s.pool_index)
            .collect();
        out.extend(
            self.implied
                .iter()
                .filter(|i| i.after <= self.cutoff)
                .map(|i| i.pool_index),
        );
        out
    }

    /// Tab-separated distortion table, one row per pick.
    pub fn table(&self) -> String {
        let mut s = String::from("k\tconstraint\tscore\tcumulative\tpixel\tkept\n");
        for (k, step) in self.steps.iter().enumerate() {
            let pixel = self
                .pixel_curve
                .get(k)
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default();
            s.push_str(&format!(
                "{}\t{}\t{:.6e}\t{:.6e}\t{}\t{}\n",
                k + 1,
                step.label,
                step.score,
                step.cumulative,
                pixel,
                k < self.cutoff
            ));
        }
        s
    }
}

/// Greedy forward selection over the pool.
///
/// Each round scores every unused candidate together with the constraints
/// already chosen and keeps the least distorting one. Candidates whose rows
/// are already spanned are set aside as implied. The trace's curve and
/// cutoff are left empty.
pub fn greedy_rank(
    model: &Model,
    pool: &CandidatePool,
    vars: &VariationSet,
    projector: &Projector,
    config: &DiscoveryConfig,
) -> Result<GreedyTrace> {
    if vars.is_empty() {
        return Err(invalid("need at least one variation"));
    }
    if pool.is_empty() {
        return Err(invalid("empty candidate pool"));
    }
    vars.validate(model)?;
    let d = model.dim();
    let prepared = projector.prepare(vars.params())?;
    let keys: Vec<(ConstraintKind, Vec<(usize, usize)>)> =
        pool.constraints.iter().map(|c| c.priority_key()).collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut trace = GreedyTrace {
        method: projector.method(),
        steps: Vec::new(),
        implied: Vec::new(),
        unranked: Vec::new(),
        pixel_curve: Vec::new(),
        cutoff: 0,
    };
    let mut cumulative = 0.0f64;
    let mut last_raw = 0.0f64;

    loop {
        let span = RowSpan::new(&rows_of(chosen.iter().map(|&i| &pool.constraints[i]), d));
        let (implied, open): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&i| span.contains(&pool.constraints[i]));
        for i in implied {
            trace.implied.push(ImpliedConstraint {
                pool_index: i,
                label: pool.constraints[i].label.clone(),
                after: chosen.len(),
            });
        }
        remaining = open;
        if remaining.is_empty() {
            break;
        }

        let scores = par::map(&remaining, |&i| -> Result<f64> {
            let set = chosen
                .iter()
                .chain(std::iter::once(&i))
                .map(|&k| &pool.constraints[k]);
            let sub = nullspace(&rows_of(set, d));
            let projected = projector.project(&prepared, &sub)?;
            let per =
                projector.distortions(&prepared, &projected, config.iou_samples, config.seed)?;
            Ok(config.aggregate.apply(&per))
        });
        let scores: Vec<f64> = scores.into_iter().collect::<Result<_>>()?;
        let best = (0..remaining.len())
            .min_by(|&a, &b| {
                scores[a]
                    .total_cmp(&scores[b])
                    .then_with(|| keys[remaining[a]].cmp(&keys[remaining[b]]))
                    .then_with(|| remaining[a].cmp(&remaining[b]))
            })
            .expect("remaining is non-empty");
        let score = scores[best];
        if !score.is_finite() {
            trace.unranked = remaining;
            break;
        }
        let pick = remaining.remove(best);
        if score < last_raw {
            log::debug!(
                "raw distortion dipped from {last_raw:.3e} to {score:.3e} at {}",
                pool.constraints[pick].label
            );
        }
        last_raw = score;
        cumulative = cumulative.max(score);
        chosen.push(pick);
        trace.steps.push(TraceStep {
            pool_index: pick,
            label: pool.constraints[pick].label.clone(),
            score,
            cumulative,
        });
    }
    debug_assert!(trace
        .steps
        .windows(2)
        .all(|w| w[0].cumulative <= w[1].cumulative));
    Ok(trace)
}

/// Reference renders of each variation, one image per camera.
pub fn reference_renders(
    model: &Model,
    vars: &VariationSet,
    cameras: &[Camera],
    size: usize,
) -> Result<Vec<Vec<Image>>> {
    par::map(&vars.variations, |v| {
        cameras
            .iter()
            .map(|c| render(model, &v.params, c, size))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

/// Mean over variations and cameras of the per-pixel squared error between
/// each projected variation and the variation itself.
pub fn pixel_distortion(
    model: &Model,
    vars: &VariationSet,
    sub: &Subspace,
    cameras: &[Camera],
    size: usize,
    projector: &Projector,
) -> Result<f64> {
    let refs = reference_renders(model, vars, cameras, size)?;
    let prepared = projector.prepare(vars.params())?;
    distortion_against(model, &prepared, &refs, sub, cameras, size, projector)
}

fn distortion_against(
    model: &Model,
    prepared: &Prepared,
    refs: &[Vec<Image>],
    sub: &Subspace,
    cameras: &[Camera],
    size: usize,
    projector: &Projector,
) -> Result<f64> {
    if refs.is_empty() {
        return Err(invalid("need at least one variation"));
    }
    if cameras.is_empty() {
        return Err(invalid("need at least one camera"));
    }
    let projected = projector.project(prepared, sub)?;
    let per: Vec<Result<f64>> = par::map_range(refs.len(), |v| {
        let Some(p) = &projected[v] else {
            return Ok(INFEASIBLE_PIXEL_DISTORTION);
        };
        if &p[..] == prepared.inputs[v] {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (cam, reference) in cameras.iter().zip(&refs[v]) {
            total += mse(&render(model, p, cam, size)?, reference)?;
        }
        Ok(total / cameras.len() as f64)
    });
    let per: Vec<f64> = per.into_iter().collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Pixel distortion after each prefix of the ranked picks.
pub fn distortion_curve(
    model: &Model,
    pool: &CandidatePool,
    vars: &VariationSet,
    steps: &[TraceStep],
    cameras: &[Camera],
    size: usize,
    projector: &Projector,
) -> Result<Vec<f64>> {
    let refs = reference_renders(model, vars, cameras, size)?;
    let prepared = projector.prepare(vars.params())?;
    (1..=steps.len())
        .map(|k| {
            let set = steps[..k].iter().map(|s| &pool.constraints[s.pool_index]);
            let sub = nullspace(&rows_of(set, model.dim()));
            distortion_against(model, &prepared, &refs, &sub, cameras, size, projector)
        })
        .collect()
}

/// Derivative of a curve: central differences inside, one-sided at the ends.
pub fn derivative(curve: &[f64]) -> Vec<f64> {
    let n = curve.len();
    (0..n)
        .map(|i| match i {
            0 => curve[1] - curve[0],
            _ if i == n - 1 => curve[n - 1] - curve[n - 2],
            _ => 0.5 * (curve[i + 1] - curve[i - 1]),
        })
        .collect()
}

/// A single mean shift in a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangePoint {
    /// First index of the second segment.
    pub index: usize,
    /// Total squared deviation from the two segment means.
    pub sse: f64,
    /// Mean of the second segment minus the mean of the first.
    pub gap: f64,
    /// Pooled within-segment standard deviation.
    pub sigma: f64,
}

impl ChangePoint {
    pub fn accepted(&self) -> bool {
        self.gap > 3.0 * self.sigma
    }
}

/// Best two-segment split of `series` by exhaustive search; the earliest
/// split wins ties.
pub fn best_split(series: &[f64]) -> Option<ChangePoint> {
    let n = series.len();
    if n < 3 {
        return None;
    }
    let mut best: Option<ChangePoint> = None;
    for k in 1..n {
        let (a, b) = series.split_at(k);
        let (ma, mb) = (mean(a), mean(b));
        let sse = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>()
            + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        if best.is_none_or(|cp| sse < cp.sse) {
            best = Some(ChangePoint {
                index: k,
                sse,
                gap: mb - ma,
                sigma: (sse / (n - 2) as f64).sqrt(),
            });
        }
    }
    best
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Number of leading picks to keep given the pixel distortion curve.
///
/// Finds the best single change point in the curve's derivative and keeps
/// everything before it when the rise clears three pooled standard
/// deviations; otherwise keeps the whole curve.
pub fn cutoff(curve: &[f64]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(invalid("curve too short"));
    }
    if curve.iter().any(|v| !v.is_finite()) {
        return Err(invalid("curve contains non-finite values"));
    }
    let cp = best_split(&derivative(curve)).expect("length checked");
    Ok(if cp.accepted() { cp.index } else { curve.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGroup {
    pub primitives: Vec<usize>,
    pub names: Vec<String>,
    /// Labels of the variations in which the group is optional.
    pub absent_in: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGroups {
    pub threshold: f64,
    pub groups: Vec<DiscreteGroup>,
    /// Removal loss per variation and primitive.
    pub losses: Vec<Vec<f64>>,
}

impl DiscreteGroups {
    pub fn empty(threshold: f64) -> Self {
        DiscreteGroups {
            threshold,
            groups: Vec::new(),
            losses: Vec::new(),
        }
    }

    /// Primitives optional in at least one variation, ascending.
    pub fn optional(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .groups
            .iter()
            .flat_map(|g| g.primitives.clone())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn group_of(&self, primitive: usize) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.primitives.contains(&primitive))
    }

    /// Groups absent in the given variation.
    pub fn absent_groups(&self, label: &str) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&g| self.groups[g].absent_in.iter().any(|l| l == label))
            .collect()
    }
}

/// Mean per-pixel error over cameras between the variation rendered whole
/// and with one primitive hidden, for every variation and primitive.
pub fn removal_losses(
    model: &Model,
    vars: &VariationSet,
    cameras: &[Camera],
    size: usize,
) -> Result<Vec<Vec<f64>>> {
    if cameras.is_empty() {
        return Err(invalid("need at least one camera"));
    }
    vars.validate(model)?;
    let refs = reference_renders(model, vars, cameras, size)?;
    let p = model.primitive_count();
    let flat: Vec<Result<f64>> = par::map_range(vars.len() * p, |k| {
        let (v, prim) = (k / p, k % p);
        let mut visible = vec![true; p];
        visible[prim] = false;
        let x = &vars.variations[v].params;
        let mut total = 0.0;
        for (cam, whole) in cameras.iter().zip(&refs[v]) {
            total += mse(&render_visible(model, x, cam, size, Some(&visible))?, whole)?;
        }
        Ok(total / cameras.len() as f64)
    });
    let flat: Vec<f64> = flat.into_iter().collect::<Result<_>>()?;
    Ok(flat.chunks(p).map(|c| c.to_vec()).collect())
}

/// Marks primitives whose removal changes a variation's renders by less
/// than `threshold` as optional there, and groups primitives that are
/// optional in exactly the same variations.
pub fn discover_discrete(
    model: &Model,
    vars: &VariationSet,
    cameras: &[Camera],
    size: usize,
    threshold: f64,
) -> Result<DiscreteGroups> {
    if !(threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    let losses = removal_losses(model, vars, cameras, size)?;
    Ok(group_optional(model, vars, losses, threshold))
}

/// Groups primitives by the set of variations in which their removal loss
/// is below `threshold`.
pub fn group_optional(
    model: &Model,
    vars: &VariationSet,
    losses: Vec<Vec<f64>>,
    threshold: f64,
) -> DiscreteGroups {
    let mut by_set: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for p in 0..model.primitive_count() {
        let absent: Vec<usize> = (0..losses.len())
            .filter(|&v| losses[v][p] < threshold)
            .collect();
        if !absent.is_empty() {
            by_set.entry(absent).or_default().push(p);
        }
    }
    let mut groups: Vec<DiscreteGroup> = by_set
        .into_iter()
        .map(|(absent, primitives)| DiscreteGroup {
            names: primitives
                .iter()
                .map(|&p| model.primitives[p].name.clone())
                .collect(),
            absent_in: absent
                .iter()
                .map(|&v| vars.variations[v].label.clone())
                .collect(),
            primitives,
        })
        .collect();
    groups.sort_by_key(|g| g.primitives[0]);
    DiscreteGroups {
        threshold,
        groups,
        losses,
    }
}

/// Result of the full discovery pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Discovery {
    pub pool: CandidatePool,
    pub trace: GreedyTrace,
    pub groups: DiscreteGroups,
    pub cameras: Vec<Camera>,
}

impl Discovery {
    pub fn method(&self) -> ProjectionMethod {
        self.trace.method
    }

    /// Pool indices of the kept constraints in pick order.
    pub fn selected(&self) -> Vec<usize> {
        self.trace.selected()
    }

    pub fn constraints(&self) -> Vec<SemanticConstraint> {
        self.selected()
            .into_iter()
            .map(|i| self.pool.constraints[i].clone())
            .collect()
    }

    pub fn subspace(&self, model: &Model) -> Subspace {
        let set = self
            .selected()
            .into_iter()
            .map(|i| &self.pool.constraints[i]);
        nullspace(&rows_of(set, model.dim()))
    }
}

/// Enumerates candidates at the base parameters, then runs
/// [`discover_with_pool`].
pub fn discover(model: &Model, vars: &VariationSet, config: &DiscoveryConfig) -> Result<Discovery> {
    vars.validate(model)?;
    let pool = enumerate_candidates(model, &vars.base, config.eps_rel)?;
    discover_with_pool(model, vars, pool, config)
}

/// Ranks the pool, cuts the ranking at the pixel distortion change point,
/// and finds optional primitive groups.
pub fn discover_with_pool(
    model: &Model,
    vars: &VariationSet,
    pool: CandidatePool,
    config: &DiscoveryConfig,
) -> Result<Discovery> {
    if vars.is_empty() {
        return Err(invalid("need at least one variation"));
    }
    vars.validate(model)?;
    let cameras = config.cameras_for(model, &vars.base)?;
    let projector = Projector::new(
        model,
        config.method_for(model),
        cameras.clone(),
        config.image_size,
        config.image_descent,
    )?;
    let mut trace = if pool.is_empty() {
        GreedyTrace {
            method: projector.method(),
            steps: Vec::new(),
            implied: Vec::new(),
            unranked: Vec::new(),
            pixel_curve: Vec::new(),
            cutoff: 0,
        }
    } else {
        greedy_rank(model, &pool, vars, &projector, config)?
    };
    trace.pixel_curve = distortion_curve(
        model,
        &pool,
        vars,
        &trace.steps,
        &cameras,
        config.render_size,
        &projector,
    )?;
    trace.cutoff = if trace.pixel_curve.len() >= 3 {
        cutoff(&trace.pixel_curve)?
    } else {
        trace.steps.len()
    };
    log::info!(
        "kept {} of {} ranked constraints ({} implied)",
        trace.cutoff,
        trace.steps.len(),
        trace
            .implied
            .iter()
            .filter(|i| i.after <= trace.cutoff)
            .count()
    );
    let groups = discover_discrete(
        model,
        vars,
        &cameras,
        config.render_size,
        config.discrete_threshold,
    )?;
    Ok(Discovery {
        pool,
        trace,
        groups,
        cameras,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::Primitive;

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

    fn small_config() -> DiscoveryConfig {
        DiscoveryConfig {
            render_size: 64,
            cameras: 2,
            iou_samples: 20_000,
            ..DiscoveryConfig::default()
        }
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff(&[0.0, 0.0, 0.0, 0.0, 0.5, 1.2, 2.0]).unwrap(), 4);
        assert_eq!(cutoff(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 5);
        assert_eq!(cutoff(&[0.0; 6]).unwrap(), 6);
        assert!(cutoff(&[0.0, 1.0])
            .unwrap_err()
            .to_string()
            .contains("curve too short"));
    }

    #[test]
    fn derivative_ends_are_one_sided() {
        assert_eq!(derivative(&[0.0, 1.0, 4.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn variation_labels_must_be_unique() {
        let x = ParamVector::zeros(3);
        let err = VariationSet::new(
            x.clone(),
            vec![
                Variation::new("a", x.clone()),
                Variation::new("a", x.clone()),
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_variation_set_rejected() {
        let m = stacked();
        let x0 = m.flatten();
        let pool = enumerate_candidates(&m, &x0, 1e-5).unwrap();
        let vars = VariationSet::new(x0.clone(), vec![]).unwrap();
        let cfg = small_config();
        let proj = Projector::from_config(&m, &x0, &cfg).unwrap();
        let err = greedy_rank(&m, &pool, &vars, &proj, &cfg).unwrap_err();
        assert!(err.to_string().contains("need at least one variation"));
    }

    #[test]
    fn satisfied_candidate_scores_zero() {
        let m = stacked();
        let x0 = m.flatten();
        let pool = enumerate_candidates(&m, &x0, 1e-5).unwrap();
        let i = pool.position("coplanar(lower.+y, upper.-y)").unwrap();
        let single = CandidatePool::from_constraints(vec![pool.constraints[i].clone()]);
        let mut x1 = x0.clone();
        x1[4] = 1.4;
        x1[1] = 0.2;
        x1[7] = 1.4;
        let vars = VariationSet::new(x0.clone(), vec![Variation::new("tall", x1)]).unwrap();
        let cfg = small_config();
        let proj = Projector::from_config(&m, &x0, &cfg).unwrap();
        let trace = greedy_rank(&m, &single, &vars, &proj, &cfg).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].score, 0.0);
    }

    #[test]
    fn identical_variations_keep_whole_pool() {
        let m = stacked();
        let x0 = m.flatten();
        let vars = VariationSet::new(
            x0.clone(),
            vec![
                Variation::new("a", x0.clone()),
                Variation::new("b", x0.clone()),
            ],
        )
        .unwrap();
        let found = discover(&m, &vars, &small_config()).unwrap();
        assert_eq!(found.selected().len(), found.pool.len());
        assert!(found.trace.pixel_curve.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contact_outranks_equal_heights() {
        let m = stacked();
        let x0 = m.flatten();
        let mut tall = x0.clone();
        // upper box grows taller while staying on the lower one
        tall[10] = 1.6;
        tall[7] = 1.3;
        let mut wide = x0.clone();
        wide[3] = 1.5;
        wide[9] = 1.5;
        let vars = VariationSet::new(
            x0.clone(),
            vec![Variation::new("tall", tall), Variation::new("wide", wide)],
        )
        .unwrap();
        let pool = enumerate_candidates(&m, &x0, 1e-5).unwrap();
        let cfg = small_config();
        let proj = Projector::from_config(&m, &x0, &cfg).unwrap();
        let trace = greedy_rank(&m, &pool, &vars, &proj, &cfg).unwrap();
        let first = &trace.steps[0];
        assert_eq!(first.score, 0.0, "{}", first.label);
        let pos = |label: &str| trace.steps.iter().position(|s| s.label == label);
        let contact = pos("coplanar(lower.+y, upper.-y)");
        let heights = pos("dim_equal(lower.sy, upper.sy)");
        if let (Some(c), Some(h)) = (contact, heights) {
            assert!(c < h);
        }
        for w in trace.steps.windows(2) {
            assert!(w[0].cumulative <= w[1].cumulative);
        }
    }

    #[test]
    fn hidden_primitive_is_optional() {
        let m = stacked();
        let x0 = m.flatten();
        let mut flat = x0.clone();
        for a in 0..3 {
            flat[9 + a] = 1e-6;
        }
        let vars = VariationSet::new(
            x0.clone(),
            vec![
                Variation::new("base", x0.clone()),
                Variation::new("flat", flat),
            ],
        )
        .unwrap();
        let cams = sample_cameras(1, 3, &m.aabb(&x0)).unwrap();
        let groups = discover_discrete(&m, &vars, &cams, 64, 1e-4).unwrap();
        assert_eq!(groups.groups.len(), 1);
        assert_eq!(groups.groups[0].names, vec!["upper"]);
        assert_eq!(groups.groups[0].absent_in, vec!["flat"]);
        assert!(groups.losses[0][0] > 1e-3);
        assert_eq!(groups.absent_groups("flat"), vec![0]);
        assert!(discover_discrete(&m, &vars, &cams, 64, 0.0).is_err());
    }
}
