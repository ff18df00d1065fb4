use nalgebra::DVector;

use super::descent::{descend, DescentConfig, DescentReport};
use super::project::ParamGuard;
use crate::csg::Model;
use crate::error::{invalid, Error, Result};
use crate::raster::{pixel_loss, RenderTarget, DEFAULT_LAMBDA};

pub const DEFAULT_FIT_ITERS: usize = 30;
pub const DEFAULT_FIT_LR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub iters: usize,
    pub lr: f64,
    pub lambda: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iters: DEFAULT_FIT_ITERS,
            lr: DEFAULT_FIT_LR,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Fits all parameters of `model` to the target images by descending the
/// sharpened pixel loss regularized toward `x0`. Returns the best parameters
/// seen together with the accepted loss history.
pub fn fit_to_images(
    model: &Model,
    x0: &[f64],
    targets: &[RenderTarget],
    config: &FitConfig,
) -> Result<DescentReport> {
    if !(config.lambda >= 0.0) {
        return Err(invalid("lambda must be non-negative"));
    }
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let scale_ref = model.bbox_diagonal(x0);
    let guard = ParamGuard::new(model, scale_ref);
    let descent = DescentConfig {
        iters: config.iters,
        lr: config.lr,
    };
    let loss = |x: &DVector<f64>| -> Result<f64> {
        let xs = guard.apply(x.as_slice());
        pixel_loss(model, &xs, x0, targets, config.lambda)
    };
    let mut report = descend(DVector::from_column_slice(x0), scale_ref, &descent, loss)?;
    report.params = DVector::from_vec(guard.apply(report.params.as_slice()));
    Ok(report)
}
