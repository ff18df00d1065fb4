//! Library side of the `reparam` binary: the HTTP service and the
//! acceptance suite.

pub mod acceptance;
pub mod service;
