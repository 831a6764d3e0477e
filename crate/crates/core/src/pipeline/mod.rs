//! End-to-end orchestration: run configuration, pipeline weights, and the
//! frame pipeline (voxelize, union fuse, BEV fuse, propose, camera
//! enhancement and gating, final fusion, ROI refinement, NMS, evaluation).

mod config;
mod run;
mod weights;

pub use config::{Modality, NoiseConfig, RunConfig, WeightsInit};
pub use run::{run_pipeline, FrameDetections, RunOutput};
pub use weights::PipelineWeights;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing calibration for {0}")]
    MissingCalibration(String),
    #[error("missing sensor data: {0}")]
    MissingData(String),
    #[error(transparent)]
    Sensor(#[from] crate::sensorio::SensorIoError),
    #[error(transparent)]
    Voxelize(#[from] crate::voxelize::VoxelizeError),
    #[error(transparent)]
    Fusion(#[from] crate::fusion::FusionError),
    #[error(transparent)]
    Detect(#[from] crate::detect::DetectError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
