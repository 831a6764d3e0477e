//! Multi-modal voxel-fusion toolkit for 3D object detection.

pub mod detect;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod mat;
pub mod nn;
pub mod pipeline;
pub mod sensorio;
pub mod synth;
pub mod voxelize;
