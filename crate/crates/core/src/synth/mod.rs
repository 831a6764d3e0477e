//! Deterministic synthetic scene oracle: planted 3D boxes become simulated
//! LiDAR/radar clouds with Doppler, weather degradation, depth-raster camera
//! images, and synthetic event streams. Also hosts the geometric training
//! augmentations as explicit parameterized transforms.

mod augment;
mod events;
mod generate;
mod rig;
mod weather;

pub use augment::augment_sample;
pub use events::{synth_events, IntensityRaster};
pub use generate::{generate_scene, SceneObject, SceneSpec};
pub use rig::default_rig;
pub use weather::{apply_weather, WeatherModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Sensor(#[from] crate::sensorio::SensorIoError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Nominal mounting point of the range sensors in the ego frame, meters.
pub const SENSOR_ORIGIN: [f64; 3] = [0.0, 0.0, 2.0];

/// Split a seed into a deterministic per-stream sub-seed.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
