use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotations::{read_annotations, write_annotations};
use super::events::EventStream;
use super::image::{read_float_grid, write_float_grid, ImageModality};
use super::pointcloud::{read_point_cloud, write_point_cloud, Sensor};
use super::scene::SceneSample;
use super::{Result, SensorIoError};

#[derive(Serialize, Deserialize)]
struct FrameMeta {
    frame_id: u64,
    timestamp_us: i64,
    clouds: Vec<Sensor>,
    images: Vec<ImageModality>,
}

/// Persist one frame into a directory: point clouds in the binary format,
/// images as float grids, events and annotations as JSON, plus a small
/// manifest of what is present.
pub fn save_sample(sample: &SceneSample, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (sensor, cloud) in &sample.clouds {
        write_point_cloud(cloud, dir.join(format!("{}.pc", sensor.as_str())))?;
    }
    for (modality, img) in &sample.images {
        write_float_grid(img, dir.join(format!("{}.grid", modality.as_str())))?;
    }
    std::fs::write(
        dir.join("events.json"),
        serde_json::to_string(&sample.events)?,
    )?;
    write_annotations(&sample.annotations, dir.join("annotations.json"))?;
    let meta = FrameMeta {
        frame_id: sample.frame_id,
        timestamp_us: sample.timestamp_us,
        clouds: sample.clouds.keys().copied().collect(),
        images: sample.images.keys().copied().collect(),
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Load a frame previously written by [`save_sample`].
pub fn load_sample(dir: impl AsRef<Path>) -> Result<SceneSample> {
    let dir = dir.as_ref();
    let meta: FrameMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    let mut clouds = std::collections::BTreeMap::new();
    for sensor in &meta.clouds {
        clouds.insert(
            *sensor,
            read_point_cloud(dir.join(format!("{}.pc", sensor.as_str())))?,
        );
    }
    let mut images = std::collections::BTreeMap::new();
    for modality in &meta.images {
        images.insert(
            *modality,
            read_float_grid(dir.join(format!("{}.grid", modality.as_str())))?,
        );
    }
    let events: EventStream =
        serde_json::from_str(&std::fs::read_to_string(dir.join("events.json"))?)?;
    let annotations = read_annotations(dir.join("annotations.json"))?;
    Ok(SceneSample {
        frame_id: meta.frame_id,
        timestamp_us: meta.timestamp_us,
        clouds,
        images,
        events,
        annotations,
    })
}

/// Load every `frames/NNNNNN` sample under a dataset directory, ordered by
/// frame id.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<SceneSample>> {
    let frames_dir = dir.as_ref().join("frames");
    let mut entries: Vec<std::path::PathBuf> = std::fs::read_dir(&frames_dir)
        .map_err(|e| {
            SensorIoError::InvalidValue(format!("no frames directory at {frames_dir:?}: {e}"))
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    let mut samples = Vec::with_capacity(entries.len());
    for e in entries {
        samples.push(load_sample(&e)?);
    }
    samples.sort_by_key(|s| s.frame_id);
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorio::{Annotations, Box3D, CameraImage, ConditionTags, Event, ObjectClass, OdometryPose, PointCloud};

    #[test]
    fn sample_round_trips_through_directory() {
        let dir = std::env::temp_dir().join("voxfuse-scene-io-test/frames/000000");
        let _ = std::fs::remove_dir_all(&dir);
        let sample = SceneSample {
            frame_id: 3,
            timestamp_us: 123456,
            clouds: std::collections::BTreeMap::from([(
                Sensor::LidarLong,
                PointCloud::new(Sensor::LidarLong, vec![[1.0, 2.0, 0.5]], vec![vec![0.7]])
                    .unwrap(),
            )]),
            images: std::collections::BTreeMap::from([(
                ImageModality::Thermal,
                CameraImage::zeros(ImageModality::Thermal, 4, 6),
            )]),
            events: EventStream::new(
                8,
                8,
                vec![Event {
                    x: 1,
                    y: 2,
                    t: 100,
                    polarity: -1,
                }],
            )
            .unwrap(),
            annotations: Annotations {
                boxes3d: vec![Box3D::new(
                    [5.0, 0.0, 0.8],
                    [4.0, 2.0, 1.5],
                    0.2,
                    ObjectClass::Vehicle,
                )
                .unwrap()],
                boxes2d: vec![],
                pose: OdometryPose::identity(),
                tags: ConditionTags::default(),
            },
        };
        save_sample(&sample, &dir).unwrap();
        let back = load_sample(&dir).unwrap();
        assert_eq!(back, sample);
    }
}
