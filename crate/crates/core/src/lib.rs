//! Constraint discovery and re-parameterization for simplified CSG programs.
//!
//! Given a union-of-primitives model and a set of design variations, the
//! crate finds the linear geometric relations common to all variations,
//! builds the subspace they define, and exposes a bounded slider space over
//! it.

// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod constraints;
pub mod csg;
pub mod discovery;
pub mod error;
pub mod io;
pub mod numeric;
pub mod par;
pub mod raster;
pub mod reparam;
pub mod synth;

pub use error::{Error, Result};
