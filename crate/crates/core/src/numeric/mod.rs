//! Linear algebra and scoring: null spaces, projections onto constraint
//! subspaces, image fitting, and volumetric IoU.

pub mod descent;
pub mod fit;
pub mod iou;
pub mod lstsq;
pub mod nullspace;
pub mod project;

pub use descent::{DescentConfig, DescentReport};
pub use fit::{fit_to_images, FitConfig};
pub use iou::{box_iou, iou, solid_iou};
pub use lstsq::{singular_values, LeastSquares};
pub use nullspace::{nullspace, rank, rref, Subspace};
pub use project::{project_alg1, project_alg2, FaceProjection};

/// Default descent settings for image-space projection.
pub const DEFAULT_ALG2: DescentConfig = DescentConfig {
    iters: 200,
    lr: 0.05,
};
