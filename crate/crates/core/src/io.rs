//! JSON documents for models, variations, candidate pools, discovery traces,
//! manipulation spaces and render target packs.
//!
//! Documents are pretty-printed with a fixed field order and a trailing
//! newline, so saving a loaded document reproduces it byte for byte.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{CandidatePool, SemanticConstraint};
use crate::csg::{Model, ParamVector, Primitive, PrimitiveKind};
use crate::discovery::{
    Discovery, DiscreteGroups, GreedyTrace, ProjectionMethod, Variation, VariationSet,
};
use crate::error::{Error, Result};
use crate::numeric::Subspace;
use crate::raster::{Camera, Image, RenderTarget};
use crate::reparam::{FreeVariable, GroupToggle, ManipulationSpace, SemanticSlider};

pub const SCHEMA_VERSION: u32 = 1;

/// File holding the camera list of a target pack.
pub const TARGETS_FILE: &str = "cameras.json";

fn doc_err(msg: impl Into<String>) -> Error {
    Error::Document(msg.into())
}

/// Serializes any document in the canonical text form.
pub fn to_text<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| doc_err(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a document, naming the field path on failure.
pub fn from_text<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            doc_err(e.inner().to_string())
        } else {
            doc_err(format!("field `{path}`: {}", e.inner()))
        }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| doc_err(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| doc_err(format!("{}: {e}", path.display())))
}

fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(doc_err(format!("unsupported schema version {schema}")));
    }
    Ok(())
}

/// Lowercase hex SHA-256 of `text`.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveEntry {
    pub kind: PrimitiveKind,
    pub name: String,
    pub translation: [f64; 3],
    pub scale: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: u32,
    pub category: String,
    pub primitives: Vec<PrimitiveEntry>,
}

impl ModelDocument {
    pub fn from_model(model: &Model) -> Self {
        ModelDocument {
            schema: SCHEMA_VERSION,
            category: model.category.clone(),
            primitives: model
                .primitives
                .iter()
                .map(|p| PrimitiveEntry {
                    kind: p.kind,
                    name: p.name.clone(),
                    translation: p.translation,
                    scale: p.scale,
                    top_radius: p.top_radius,
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        check_schema(self.schema)?;
        let primitives = self
            .primitives
            .into_iter()
            .map(|e| Primitive {
                kind: e.kind,
                name: e.name,
                translation: e.translation,
                scale: e.scale,
                top_radius: e.top_radius,
            })
            .collect();
        Model::new(&self.category, primitives)
    }
}

pub fn model_to_text(model: &Model) -> Result<String> {
    to_text(&ModelDocument::from_model(model))
}

pub fn parse_model(text: &str) -> Result<Model> {
    from_text::<ModelDocument>(text)?.into_model()
}

/// Content hash of a model's canonical document.
pub fn model_hash(model: &Model) -> Result<String> {
    Ok(content_hash(&model_to_text(model)?))
}

pub fn load_model(path: &Path) -> Result<Model> {
    parse_model(&read(path)?)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    write(path, &model_to_text(model)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExternalGenerator,
    Synthetic,
    Manual,
}

/// What a synthetic variation set was generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub constraints: Vec<String>,
    pub rank: usize,
    pub free_dims: usize,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationDocument {
    pub schema: u32,
    /// Content hash of the base model document.
    pub base_model: String,
    pub provenance: Provenance,
    pub variations: Vec<Variation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl VariationDocument {
    pub fn new(
        model: &Model,
        provenance: Provenance,
        vars: &VariationSet,
        ground_truth: Option<GroundTruth>,
    ) -> Result<Self> {
        vars.validate(model)?;
        Ok(VariationDocument {
            schema: SCHEMA_VERSION,
            base_model: model_hash(model)?,
            provenance,
            variations: vars.variations.clone(),
            ground_truth,
        })
    }

    /// The variations against `model`, refusing documents made for another
    /// model.
    pub fn into_set(self, model: &Model) -> Result<VariationSet> {
        check_schema(self.schema)?;
        let hash = model_hash(model)?;
        if self.base_model != hash {
            return Err(doc_err(format!(
                "variation document was made for model {}, not {}",
                self.base_model, hash
            )));
        }
        let set = VariationSet::new(model.flatten(), self.variations)?;
        set.validate(model)?;
        Ok(set)
    }
}

pub fn load_variations(path: &Path) -> Result<VariationDocument> {
    from_text(&read(path)?)
}

pub fn save_variations(path: &Path, doc: &VariationDocument) -> Result<()> {
    write(path, &to_text(doc)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolDocument {
    pub schema: u32,
    pub base_model: String,
    pub eps_rel: f64,
    pub tolerance: f64,
    pub constraints: Vec<SemanticConstraint>,
}

impl PoolDocument {
    pub fn new(model: &Model, pool: &CandidatePool) -> Result<Self> {
        Ok(PoolDocument {
            schema: SCHEMA_VERSION,
            base_model: model_hash(model)?,
            eps_rel: pool.eps_rel,
            tolerance: pool.tolerance,
            constraints: pool.constraints.clone(),
        })
    }

    pub fn into_pool(self) -> Result<CandidatePool> {
        check_schema(self.schema)?;
        Ok(CandidatePool {
            constraints: self.constraints,
            eps_rel: self.eps_rel,
            tolerance: self.tolerance,
        })
    }
}

/// Audit record of one discovery run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDocument {
    pub schema: u32,
    pub base_model: String,
    pub pool_size: usize,
    pub selected: Vec<String>,
    pub trace: GreedyTrace,
    pub groups: DiscreteGroups,
    pub cameras: Vec<Camera>,
}

impl TraceDocument {
    pub fn new(model: &Model, found: &Discovery) -> Result<Self> {
        Ok(TraceDocument {
            schema: SCHEMA_VERSION,
            base_model: model_hash(model)?,
            pool_size: found.pool.len(),
            selected: found.constraints().into_iter().map(|c| c.label).collect(),
            trace: found.trace.clone(),
            groups: found.groups.clone(),
            cameras: found.cameras.clone(),
        })
    }
}

/// Self-contained manipulation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDocument {
    pub schema: u32,
    pub model: ModelDocument,
    pub method: ProjectionMethod,
    pub constraints: Vec<SemanticConstraint>,
    /// `C`, row-major.
    pub constraint_matrix: Vec<Vec<f64>>,
    /// `N`, one entry per parameter, each holding one value per free variable.
    pub basis: Vec<Vec<f64>>,
    pub pivots: Vec<usize>,
    pub base: ParamVector,
    pub sliders: Vec<SemanticSlider>,
    pub free: Vec<FreeVariable>,
    pub groups: Vec<GroupToggle>,
    pub bounded: bool,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(doc_err(format!("{what} rows must have {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl SpaceDocument {
    pub fn from_space(space: &ManipulationSpace) -> Self {
        SpaceDocument {
            schema: SCHEMA_VERSION,
            model: ModelDocument::from_model(&space.model),
            method: space.method,
            constraints: space.constraints.clone(),
            constraint_matrix: matrix_rows(&space.subspace.constraints),
            basis: matrix_rows(&space.subspace.basis),
            pivots: space.subspace.pivots.clone(),
            base: space.base.clone(),
            sliders: space.sliders.clone(),
            free: space.free.clone(),
            groups: space.groups.clone(),
            bounded: space.bounded,
        }
    }

    pub fn into_space(self) -> Result<ManipulationSpace> {
        check_schema(self.schema)?;
        let model = self.model.into_model()?;
        let d = model.dim();
        let constraints = rows_matrix(&self.constraint_matrix, d, "constraint_matrix")?;
        if self.basis.len() != d {
            return Err(doc_err(format!("basis must have {d} rows")));
        }
        let basis = rows_matrix(&self.basis, self.free.len(), "basis")?;
        let subspace = Subspace {
            constraints,
            basis,
            pivots: self.pivots,
            free: self.free.iter().map(|f| f.index).collect(),
        };
        if subspace.rank() + subspace.nullity() != d {
            return Err(doc_err(
                "pivot and free counts do not add up to the dimension",
            ));
        }
        if subspace.constraints.nrows() > 0
            && (&subspace.constraints * &subspace.basis).amax() > 1e-9
        {
            return Err(doc_err("basis does not lie in the constraint null space"));
        }
        if self.base.len() != d
            || self
                .sliders
                .iter()
                .any(|s| s.delta.len() != d || s.target.len() != d)
        {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.base.len(),
            });
        }
        for g in &self.groups {
            if g.primitives.iter().any(|&p| p >= model.primitive_count()) {
                return Err(doc_err(format!(
                    "group {} names a missing primitive",
                    g.name
                )));
            }
        }
        Ok(ManipulationSpace {
            model,
            method: self.method,
            constraints: self.constraints,
            subspace,
            base: self.base,
            sliders: self.sliders,
            free: self.free,
            groups: self.groups,
            bounded: self.bounded,
        })
    }
}

pub fn space_to_text(space: &ManipulationSpace) -> Result<String> {
    to_text(&SpaceDocument::from_space(space))
}

pub fn load_space(path: &Path) -> Result<ManipulationSpace> {
    from_text::<SpaceDocument>(&read(path)?)?.into_space()
}

pub fn save_space(path: &Path, space: &ManipulationSpace) -> Result<()> {
    write(path, &space_to_text(space)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub image: String,
    pub camera: Camera,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPack {
    pub schema: u32,
    pub targets: Vec<TargetEntry>,
}

/// Writes one PNG per target plus the camera list into `dir`.
pub fn save_targets(dir: &Path, targets: &[RenderTarget]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(targets.len());
    for (k, t) in targets.iter().enumerate() {
        let name = format!("view{k}.png");
        t.image.save_png(&dir.join(&name))?;
        entries.push(TargetEntry {
            image: name,
            camera: t.camera,
        });
    }
    let pack = TargetPack {
        schema: SCHEMA_VERSION,
        targets: entries,
    };
    write(&dir.join(TARGETS_FILE), &to_text(&pack)?)
}

/// Reads a target pack written by [`save_targets`] or by hand.
pub fn load_targets(dir: &Path) -> Result<Vec<RenderTarget>> {
    let pack: TargetPack = from_text(&read(&dir.join(TARGETS_FILE))?)?;
    check_schema(pack.schema)?;
    if pack.targets.is_empty() {
        return Err(doc_err("target pack lists no images"));
    }
    pack.targets
        .into_iter()
        .map(|e| {
            e.camera.validate()?;
            Ok(RenderTarget {
                camera: e.camera,
                image: Image::load_png(&dir.join(&e.image))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn model_round_trip_is_byte_stable() {
        for (_, m) in bundled::all() {
            let text = model_to_text(&m).unwrap();
            let back = parse_model(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_text(&back).unwrap(), text);
        }
    }

    #[test]
    fn empty_model_rejected() {
        let text = r#"{"schema": 1, "category": "x", "primitives": []}"#;
        let err = parse_model(text).unwrap_err().to_string();
        assert!(
            err.contains("model must contain at least one primitive"),
            "{err}"
        );
    }

    #[test]
    fn bad_field_type_names_field() {
        let text = model_to_text(&bundled::chair()).unwrap().replacen(
            "\"scale\": [",
            "\"scale\": \"wide\", \"x\": [",
            1,
        );
        let err = parse_model(&text).unwrap_err().to_string();
        assert!(err.contains("primitives[0].scale"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"schema": 1, "category": "x", "primitives": [], "color": 3}"#;
        let err = parse_model(text).unwrap_err().to_string();
        assert!(err.contains("color"), "{err}");
    }

    #[test]
    fn variation_hash_checked() {
        let chair = bundled::chair();
        let vars = VariationSet::new(
            chair.flatten(),
            vec![Variation::new("same", chair.flatten())],
        )
        .unwrap();
        let doc = VariationDocument::new(&chair, Provenance::Manual, &vars, None).unwrap();
        let text = to_text(&doc).unwrap();
        assert!(text.contains("\"provenance\": \"manual\""));
        let back: VariationDocument = from_text(&text).unwrap();
        assert_eq!(back.clone().into_set(&chair).unwrap(), vars);
        assert!(back.into_set(&bundled::table()).is_err());
    }
}
