//! Detection stages: proposal generation from fused BEV occupancy, ROI grid
//! pooling over fused voxel features, the refinement head, and oriented NMS.

mod nms;
mod propose;
mod refine;
mod roi;

pub use nms::nms;
pub use propose::{propose_from_bev, BevZStats, ProposalParams, ProposalSet};
pub use refine::{refine_boxes, RefinementConfig};
pub use roi::{roi_grid_pool, roi_grid_pool_points};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<crate::nn::NnError> for DetectError {
    fn from(e: crate::nn::NnError) -> Self {
        DetectError::ShapeMismatch(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DetectError>;
