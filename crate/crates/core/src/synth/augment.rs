use nalgebra::{Matrix3, Vector3};

use crate::sensorio::{normalize_yaw, Box3D, OdometryPose, PointCloud, SceneSample};

use super::{Result, SynthError};

fn transform_point(p: [f32; 3], flip: bool, scale: f64, rot: &Matrix3<f64>) -> [f32; 3] {
    let mut v = Vector3::new(f64::from(p[0]), f64::from(p[1]), f64::from(p[2]));
    if flip {
        v.y = -v.y;
    }
    v *= scale;
    let v = rot * v;
    [v.x as f32, v.y as f32, v.z as f32]
}

fn transform_box(b: &Box3D, flip: bool, scale: f64, rot_z: f64, rot: &Matrix3<f64>) -> Box3D {
    let mut c = Vector3::new(b.cx, b.cy, b.cz);
    let mut yaw = b.yaw;
    if flip {
        c.y = -c.y;
        yaw = -yaw;
    }
    c *= scale;
    let c = rot * c;
    let mut out = b.clone();
    out.cx = c.x;
    out.cy = c.y;
    out.cz = c.z;
    out.l = b.l * scale;
    out.w = b.w * scale;
    out.h = b.h * scale;
    out.yaw = normalize_yaw(yaw + rot_z);
    out
}

/// Geometric training augmentation as a deterministic parameterized
/// transform: horizontal flip (negating y and yaw), global scaling, and
/// rotation about +Z, applied in that order to points, boxes, and the ego
/// pose. Images and events are camera-frame data and stay untouched.
pub fn augment_sample(
    sample: &SceneSample,
    flip: bool,
    scale: f64,
    rot_z: f64,
) -> Result<SceneSample> {
    if scale <= 0.0 || !scale.is_finite() {
        return Err(SynthError::InvalidSpec(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let rot = crate::mat::axis_angle(&Vector3::new(0.0, 0.0, 1.0), rot_z);
    let mut out = sample.clone();

    for cloud in out.clouds.values_mut() {
        let points: Vec<[f32; 3]> = cloud
            .points
            .iter()
            .map(|p| transform_point(*p, flip, scale, &rot))
            .collect();
        *cloud = PointCloud::new(cloud.sensor, points, cloud.features.clone())
            .map_err(SynthError::Sensor)?;
    }

    out.annotations.boxes3d = sample
        .annotations
        .boxes3d
        .iter()
        .map(|b| transform_box(b, flip, scale, rot_z, &rot))
        .collect();

    // pose: conjugate the rotation part by the flip, scale the translation
    let f = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    let pose = &sample.annotations.pose;
    let (mut r, mut t) = (pose.rotation, pose.translation);
    if flip {
        r = f * r * f;
        t = f * t;
    }
    t *= scale;
    r = rot * r;
    t = rot * t;
    out.annotations.pose = OdometryPose::new(r, t).map_err(SynthError::Sensor)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorio::{ObjectClass, Sensor};
    use crate::synth::generate::{generate_scene, SceneObject, SceneSpec};
    use crate::synth::rig::default_rig;
    use crate::sensorio::ConditionTags;

    fn sample() -> SceneSample {
        let spec = SceneSpec {
            objects: vec![SceneObject {
                class: ObjectClass::Vehicle,
                b: Box3D::new([20.0, 4.0, 0.8], [4.5, 1.9, 1.6], 0.5, ObjectClass::Vehicle)
                    .unwrap(),
                velocity: [3.0, 0.0, 0.0],
            }],
            ego_velocity: [0.0; 3],
            ground_z: 0.0,
            points_per_object: 50,
            ground_points: 100,
            weather: None,
            tags: ConditionTags::default(),
            event_threshold: 0.2,
            seed: 31,
        };
        generate_scene(&spec, &default_rig(), 0, 0).unwrap()
    }

    fn clouds_close(a: &SceneSample, b: &SceneSample, tol: f32) {
        for (s, cloud) in &a.clouds {
            let other = &b.clouds[s];
            assert_eq!(cloud.len(), other.len());
            for (p, q) in cloud.points.iter().zip(&other.points) {
                for k in 0..3 {
                    assert!((p[k] - q[k]).abs() <= tol, "{p:?} vs {q:?}");
                }
            }
        }
    }

    #[test]
    fn double_flip_is_identity() {
        let s = sample();
        let once = augment_sample(&s, true, 1.0, 0.0).unwrap();
        let twice = augment_sample(&once, true, 1.0, 0.0).unwrap();
        clouds_close(&s, &twice, 0.0);
        for (a, b) in s
            .annotations
            .boxes3d
            .iter()
            .zip(&twice.annotations.boxes3d)
        {
            assert_eq!((a.cx, a.cy, a.yaw), (b.cx, b.cy, b.yaw));
        }
    }

    #[test]
    fn scale_doubles_extents_and_ranges() {
        let s = sample();
        let scaled = augment_sample(&s, false, 2.0, 0.0).unwrap();
        let a = &s.annotations.boxes3d[0];
        let b = &scaled.annotations.boxes3d[0];
        assert_eq!(b.l, a.l * 2.0);
        assert_eq!(b.cx, a.cx * 2.0);
        let p0 = s.clouds[&Sensor::LidarLong].points[0];
        let q0 = scaled.clouds[&Sensor::LidarLong].points[0];
        for k in 0..3 {
            assert!((q0[k] - 2.0 * p0[k]).abs() < 1e-4);
        }
    }

    #[test]
    fn rotation_and_its_inverse_cancel() {
        let s = sample();
        let phi = 0.6;
        let there = augment_sample(&s, false, 1.0, phi).unwrap();
        let back = augment_sample(&there, false, 1.0, -phi).unwrap();
        clouds_close(&s, &back, 1e-5);
        let a = &s.annotations.boxes3d[0];
        let b = &back.annotations.boxes3d[0];
        assert!((a.cx - b.cx).abs() < 1e-9);
        assert!((a.yaw - b.yaw).abs() < 1e-9);
    }

    #[test]
    fn flip_negates_y_and_yaw() {
        let s = sample();
        let flipped = augment_sample(&s, true, 1.0, 0.0).unwrap();
        let a = &s.annotations.boxes3d[0];
        let b = &flipped.annotations.boxes3d[0];
        assert_eq!(b.cy, -a.cy);
        assert_eq!(b.yaw, -a.yaw);
        assert_eq!(b.cx, a.cx);
    }

    #[test]
    fn transform_then_filter_commutes_with_transformed_range() {
        use crate::sensorio::{filter_to_range, RangeBox};
        let s = sample();
        let range = RangeBox::new([0.0, -10.0, -2.0], [30.0, 10.0, 4.0]).unwrap();
        // flipped range: y in [min, max) maps to (-max, -min]; with points
        // almost surely off the boundary the half-open flip is immaterial
        let flipped_range = RangeBox::new([0.0, -10.0, -2.0], [30.0, 10.0, 4.0]).unwrap();

        let transformed = augment_sample(&s, true, 1.0, 0.0).unwrap();
        let a = filter_to_range(&transformed.clouds[&Sensor::LidarLong], &flipped_range);

        let filtered_first = filter_to_range(&s.clouds[&Sensor::LidarLong], &range);
        let mut pre = s.clone();
        pre.clouds.insert(Sensor::LidarLong, filtered_first);
        let b = augment_sample(&pre, true, 1.0, 0.0).unwrap();

        assert_eq!(a.points, b.clouds[&Sensor::LidarLong].points);
    }
}
