use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::CameraModel;

use super::annotations::repair_rotation;
use super::image::ImageModality;
use super::pointcloud::Sensor;
use super::{Result, SensorIoError};

/// Extrinsic pose of one range sensor (sensor frame -> rig reference frame).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSensorExtrinsic {
    pub sensor: Sensor,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Calibrated sensor rig: camera models plus range-sensor extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRig {
    pub cameras: Vec<CameraModel>,
    pub range_sensors: Vec<RangeSensorExtrinsic>,
}

impl SensorRig {
    pub fn camera(&self, modality: ImageModality) -> Option<&CameraModel> {
        self.cameras.iter().find(|c| c.modality == modality)
    }
}

#[derive(Serialize, Deserialize)]
struct CameraWire {
    modality: ImageModality,
    width: u32,
    height: u32,
    /// Row-major 3x3 intrinsics.
    k: Vec<f64>,
    /// Row-major 3x3 rotation, sensor frame -> camera frame.
    r: Vec<f64>,
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RangeSensorWire {
    sensor: Sensor,
    r: Vec<f64>,
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RigWire {
    cameras: Vec<CameraWire>,
    #[serde(default)]
    range_sensors: Vec<RangeSensorWire>,
}

fn mat3_from_row_major(name: &str, v: &[f64]) -> Result<Matrix3<f64>> {
    if v.len() != 9 {
        return Err(SensorIoError::MissingField(format!("{name}[9]")));
    }
    Ok(Matrix3::from_row_slice(v))
}

fn vec3_from(name: &str, v: &[f64]) -> Result<Vector3<f64>> {
    if v.len() != 3 {
        return Err(SensorIoError::MissingField(format!("{name}[3]")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

/// Parse a calibration file. Every rotation within 1e-3 of orthonormal is
/// re-orthonormalized via polar decomposition; singular intrinsics or
/// rotations with larger drift are errors.
pub fn load_rig_from_str(json: &str) -> Result<SensorRig> {
    let wire: RigWire = serde_json::from_str(json)?;
    let mut cameras = Vec::with_capacity(wire.cameras.len());
    for cw in &wire.cameras {
        let k = mat3_from_row_major("camera.k", &cw.k)?;
        let r = repair_rotation(mat3_from_row_major("camera.r", &cw.r)?, 1e-3)?;
        let t = vec3_from("camera.t", &cw.t)?;
        let cam = CameraModel::new(cw.modality, k, r, t, (cw.width, cw.height))
            .map_err(|e| SensorIoError::InvalidIntrinsics(e.to_string()))?;
        cameras.push(cam);
    }
    let mut range_sensors = Vec::with_capacity(wire.range_sensors.len());
    for rw in &wire.range_sensors {
        range_sensors.push(RangeSensorExtrinsic {
            sensor: rw.sensor,
            rotation: repair_rotation(mat3_from_row_major("range.r", &rw.r)?, 1e-3)?,
            translation: vec3_from("range.t", &rw.t)?,
        });
    }
    Ok(SensorRig {
        cameras,
        range_sensors,
    })
}

pub fn load_rig(path: impl AsRef<Path>) -> Result<SensorRig> {
    let json = std::fs::read_to_string(path)?;
    load_rig_from_str(&json)
}

pub fn save_rig(rig: &SensorRig, path: impl AsRef<Path>) -> Result<()> {
    let wire = RigWire {
        cameras: rig
            .cameras
            .iter()
            .map(|c| CameraWire {
                modality: c.modality,
                width: c.resolution.0,
                height: c.resolution.1,
                k: c.intrinsics.transpose().as_slice().to_vec(),
                r: c.rotation.transpose().as_slice().to_vec(),
                t: c.translation.as_slice().to_vec(),
            })
            .collect(),
        range_sensors: rig
            .range_sensors
            .iter()
            .map(|s| RangeSensorWire {
                sensor: s.sensor,
                r: s.rotation.transpose().as_slice().to_vec(),
                t: s.translation.as_slice().to_vec(),
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&wire)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::orthonormal_drift;

    fn rig_json(r_entries: &str) -> String {
        format!(
            r#"{{
              "cameras": [{{
                "modality": "rgb", "width": 640, "height": 480,
                "k": [100, 0, 320, 0, 100, 240, 0, 0, 1],
                "r": {r_entries},
                "t": [0, 0, 0]
              }}],
              "range_sensors": [{{
                "sensor": "lidar_long",
                "r": [1,0,0,0,1,0,0,0,1],
                "t": [0.5, 0, 1.2]
              }}]
            }}"#
        )
    }

    #[test]
    fn loads_identity_rig() {
        let rig = load_rig_from_str(&rig_json("[1,0,0,0,1,0,0,0,1]")).unwrap();
        assert_eq!(rig.cameras.len(), 1);
        assert_eq!(rig.range_sensors[0].sensor, Sensor::LidarLong);
        assert_eq!(rig.cameras[0].intrinsics[(0, 2)], 320.0);
    }

    #[test]
    fn singular_intrinsics_rejected() {
        let json = r#"{
          "cameras": [{
            "modality": "rgb", "width": 64, "height": 64,
            "k": [0, 0, 0, 0, 1, 0, 0, 0, 1],
            "r": [1,0,0,0,1,0,0,0,1],
            "t": [0, 0, 0]
          }]
        }"#;
        assert!(matches!(
            load_rig_from_str(json),
            Err(SensorIoError::InvalidIntrinsics(_))
        ));
    }

    #[test]
    fn drifted_rotation_is_reorthonormalized() {
        // 1e-4 drift: acceptable, must come back as an exact rotation.
        let rig = load_rig_from_str(&rig_json("[1, 0.0001, 0, 0, 1, 0, 0, 0, 1]")).unwrap();
        let r = rig.cameras[0].rotation;
        assert!(orthonormal_drift(&r) < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overly_drifted_rotation_is_rejected() {
        assert!(matches!(
            load_rig_from_str(&rig_json("[1, 0.1, 0, 0, 1, 0, 0, 0, 1]")),
            Err(SensorIoError::NonOrthonormal { .. })
        ));
    }

    #[test]
    fn rig_round_trips_through_file() {
        let dir = std::env::temp_dir().join("voxfuse-rig-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rig.json");
        let rig = load_rig_from_str(&rig_json("[0,-1,0,0,0,-1,1,0,0]")).unwrap();
        save_rig(&rig, &path).unwrap();
        let back = load_rig(&path).unwrap();
        assert_eq!(back, rig);
    }
}
