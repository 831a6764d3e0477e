//! Range-sensor encoding: point-to-voxel features (backbone stub), sparse
//! union fusion across LiDAR and 4D radar, vertical collapse to BEV, and
//! BEV concat-conv fusion.

mod bev;
mod encode;
mod fuse;
mod grid;

pub use bev::{bev_collapse, bev_concat_fuse, BEVMap};
pub use encode::{occupancy_from_cloud, voxelize_points, LiftWeights, OccupancyGrid};
pub use fuse::{union_fuse, FusionProjector};
pub use grid::{SparseVoxelSet, VoxelGridSpec, VoxelIdx};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VoxelizeError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("point ({0}, {1}, {2}) outside grid range")]
    PointOutsideRange(f64, f64, f64),
    #[error("grid specs do not match: {0}")]
    SpecMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

impl From<crate::nn::NnError> for VoxelizeError {
    fn from(e: crate::nn::NnError) -> Self {
        match e {
            crate::nn::NnError::ShapeMismatch(m) => VoxelizeError::ShapeMismatch(m),
            crate::nn::NnError::InvalidWeights(m) => VoxelizeError::InvalidWeights(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, VoxelizeError>;
