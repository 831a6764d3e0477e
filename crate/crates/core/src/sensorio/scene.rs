use std::collections::BTreeMap;

use super::annotations::Annotations;
use super::events::EventStream;
use super::image::{CameraImage, ImageModality};
use super::pointcloud::{PointCloud, Sensor};

/// One synchronized multi-sensor frame: point clouds, images, the raw event
/// stream, annotations, condition tags, and ego pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub frame_id: u64,
    pub timestamp_us: i64,
    pub clouds: BTreeMap<Sensor, PointCloud>,
    pub images: BTreeMap<ImageModality, CameraImage>,
    pub events: EventStream,
    pub annotations: Annotations,
}

impl SceneSample {
    pub fn cloud(&self, sensor: Sensor) -> Option<&PointCloud> {
        self.clouds.get(&sensor)
    }

    pub fn image(&self, modality: ImageModality) -> Option<&CameraImage> {
        self.images.get(&modality)
    }
}
