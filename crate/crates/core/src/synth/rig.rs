use nalgebra::{Matrix3, Vector3};

use crate::geometry::CameraModel;
use crate::sensorio::{ImageModality, RangeSensorExtrinsic, Sensor, SensorRig};

/// Rotation taking the ego frame (x forward, y left, z up) into a camera
/// frame (x right, y down, z forward) looking along +x.
fn forward_rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

/// Synthetic sensor rig: forward-looking RGB, thermal, and event cameras at
/// small lateral offsets, plus LiDAR and 4D radar extrinsics at the nominal
/// mount. All left-camera geometry; resolutions follow the pipeline's
/// downsampling ratios.
pub fn default_rig() -> SensorRig {
    let r = forward_rotation();
    let mount = Vector3::new(0.0, 0.0, 2.0);
    let cam_t = |lateral: f64| -> Vector3<f64> {
        // camera centered at (0, lateral, 1.6) in ego coordinates:
        // t = -R * C for sensor->camera mapping p_cam = R p + t
        let center = Vector3::new(0.2, lateral, 1.6);
        -(r * center)
    };
    let k = |f: f64, cx: f64, cy: f64| Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0);
    let cameras = vec![
        CameraModel::new(
            ImageModality::Rgb,
            k(500.0, 320.0, 240.0),
            r,
            cam_t(0.1),
            (640, 480),
        )
        .expect("valid rgb camera"),
        CameraModel::new(
            ImageModality::Thermal,
            k(250.0, 160.0, 120.0),
            r,
            cam_t(-0.1),
            (320, 240),
        )
        .expect("valid thermal camera"),
        CameraModel::new(
            ImageModality::EventGrid,
            k(500.0, 320.0, 240.0),
            r,
            cam_t(0.3),
            (640, 480),
        )
        .expect("valid event camera"),
    ];
    let range_sensors = vec![
        RangeSensorExtrinsic {
            sensor: Sensor::LidarLong,
            rotation: Matrix3::identity(),
            translation: mount,
        },
        RangeSensorExtrinsic {
            sensor: Sensor::Radar4d,
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.5, 0.0, 1.0),
        },
    ];
    SensorRig {
        cameras,
        range_sensors,
    }
}
