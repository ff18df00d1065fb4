//! Stateless HTTP service over one manipulation space.
//!
//! `GET /space` describes the sliders, `POST /evaluate` turns a state into
//! parameters plus a mesh, and `GET /mesh/base` returns the neutral mesh.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reparam_core::csg::{tessellate_visible, TriangleMesh};
use reparam_core::discovery::ProjectionMethod;
use reparam_core::reparam::{FreeVariable, GroupToggle, ManipulationSpace, ManipulationState};
use reparam_core::Error;
use serde::{Deserialize, Serialize};

/// Circumference subdivision of cylinders in served meshes.
pub const MESH_SEGMENTS: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SliderInfo {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

/// Everything a client needs to lay out its controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceInfo {
    pub category: String,
    pub dim: usize,
    pub method: ProjectionMethod,
    pub bounded: bool,
    pub constraints: Vec<String>,
    pub sliders: Vec<SliderInfo>,
    pub free: Vec<FreeVariable>,
    pub groups: Vec<GroupToggle>,
    pub default_state: ManipulationState,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvaluateResponse {
    pub params: Vec<f64>,
    pub visible: Vec<bool>,
    pub warnings: Vec<String>,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub error: String,
}

pub struct ServiceState {
    space: ManipulationSpace,
    info: SpaceInfo,
    base_mesh: TriangleMesh,
}

impl ServiceState {
    pub fn new(space: ManipulationSpace) -> reparam_core::Result<Self> {
        let neutral = space.neutral_state();
        let base = space.evaluate(&neutral)?;
        let base_mesh = tessellate_visible(
            &space.model,
            &base.params,
            MESH_SEGMENTS,
            Some(&base.visible),
        )?;
        let info = SpaceInfo {
            category: space.model.category.clone(),
            dim: space.dim(),
            method: space.method,
            bounded: space.bounded,
            constraints: space.constraints.iter().map(|c| c.label.clone()).collect(),
            sliders: space
                .sliders
                .iter()
                .map(|s| SliderInfo {
                    label: s.label.clone(),
                    lo: 0.0,
                    hi: 1.0,
                })
                .collect(),
            free: space.free.clone(),
            groups: space.groups.clone(),
            default_state: neutral,
        };
        Ok(ServiceState {
            space,
            info,
            base_mesh,
        })
    }

    pub fn evaluate(&self, state: &ManipulationState) -> reparam_core::Result<EvaluateResponse> {
        let ev = self.space.evaluate(state)?;
        let mesh = tessellate_visible(
            &self.space.model,
            &ev.params,
            MESH_SEGMENTS,
            Some(&ev.visible),
        )?;
        Ok(EvaluateResponse {
            params: ev.params.into_inner(),
            visible: ev.visible,
            warnings: ev.warnings,
            mesh,
        })
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/space", get(space))
        .route("/evaluate", post(evaluate))
        .route("/mesh/base", get(base_mesh))
        .fallback(not_found)
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
        }),
    )
        .into_response()
}

async fn space(State(s): State<Arc<ServiceState>>) -> Json<SpaceInfo> {
    Json(s.info.clone())
}

async fn base_mesh(State(s): State<Arc<ServiceState>>) -> Json<TriangleMesh> {
    Json(s.base_mesh.clone())
}

async fn evaluate(State(s): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let state: ManipulationState = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed state: {e}")),
    };
    match s.evaluate(&state) {
        Ok(r) => Json(r).into_response(),
        Err(e @ Error::DimensionMismatch { .. }) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        }
        Err(e @ Error::InvalidArgument(_)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such route")
}
