//! Multi-sensor geometry: camera models and projection, rotation-based
//! homography alignment, the reflector-based rigid-transform solver,
//! controlled extrinsic perturbation, and the stereo row-alignment check.

mod camera;
mod homography;
mod rigid;
mod solve;

pub use camera::{project_point, projection_matrix, CameraModel, Projection};
pub use homography::{homography, warp_image};
pub use rigid::{perturb_extrinsics, RigidTransform};
pub use solve::{epipolar_row_check, select_reflector, solve_rigid, Correspondence, RigidSolution};

use thiserror::Error;

/// Errors from geometric operations.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// Intrinsic matrix not invertible / not a valid pinhole K.
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    /// Rotation is not orthonormal with det +1.
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    /// Point has non-positive depth in the camera frame.
    #[error("point behind camera: depth {0:.3e}")]
    BehindCamera(f64),
    /// Matrix required to be invertible is singular.
    #[error("singular matrix: {0}")]
    Singular(String),
    /// Fewer correspondences than the solver needs.
    #[error("too few correspondences: got {got}, need {need}")]
    TooFewPoints { got: usize, need: usize },
    /// Correspondence geometry is degenerate (near-coplanar or collinear).
    #[error("degenerate correspondence geometry: {0}")]
    Degenerate(String),
    /// Empty input where at least one element is required.
    #[error("empty input: {0}")]
    Empty(String),
    /// Any other invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
