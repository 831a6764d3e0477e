//! Canonical data model and serialization for sensor payloads and annotations.
//!
//! Houses the point-cloud binary format, annotation/calibration JSON schemas,
//! the event-to-voxel-grid encoder, detection-range filtering, and the
//! [`SceneSample`] container that groups one synchronized frame.

mod annotations;
mod boxes;
mod events;
mod image;
mod pointcloud;
mod rig;
mod scene;
mod scene_io;

pub use annotations::{
    read_annotations, read_annotations_from_str, write_annotations, Annotations, ConditionTags,
    Light, OdometryPose, Weather,
};
pub use boxes::{normalize_yaw, Box2D, Box3D, ObjectClass};
pub use events::{events_to_voxel_grid, Event, EventStream};
pub use image::{read_float_grid, write_float_grid, CameraImage, ImageModality};
pub use pointcloud::{
    filter_to_range, read_point_cloud, write_point_cloud, PointCloud, RangeBox, Sensor,
};
pub use rig::{load_rig, load_rig_from_str, save_rig, RangeSensorExtrinsic, SensorRig};
pub use scene::SceneSample;
pub use scene_io::{load_dataset, load_sample, save_sample};

use thiserror::Error;

/// Errors produced by sensor I/O and validation.
#[derive(Debug, Error)]
pub enum SensorIoError {
    /// File does not start with the expected magic bytes.
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    /// Format version is not supported by this reader.
    #[error("version mismatch: file version {found}, supported {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    /// File ended before the declared payload was complete.
    #[error("truncated payload: needed {needed} bytes, had {available}")]
    Truncated { needed: usize, available: usize },
    /// Encoded sensor/modality tag is not recognized.
    #[error("unknown tag value {0}")]
    UnknownTag(u8),
    /// A required field is missing from a JSON document.
    #[error("missing field `{0}`")]
    MissingField(String),
    /// Class string not in the schema.
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    /// Rotation matrix is too far from orthonormal to repair.
    #[error("non-orthonormal rotation: drift {drift:.3e} exceeds tolerance {tol:.1e}")]
    NonOrthonormal { drift: f64, tol: f64 },
    /// Intrinsic matrix is singular or otherwise unusable.
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    /// Value fails a domain invariant (non-finite, wrong arity, bad bounds).
    #[error("invalid value: {0}")]
    InvalidValue(String),
    /// Event timestamp outside the binning window.
    #[error("event at t={t} outside window [{t0}, {t1}]")]
    EventOutsideWindow { t: i64, t0: i64, t1: i64 },
    /// Binning window has zero or negative length.
    #[error("zero-length event window [{t0}, {t1}]")]
    ZeroLengthWindow { t0: i64, t1: i64 },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SensorIoError>;
