use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::mat::{orthonormal_drift, polar_rotation};

use super::boxes::{normalize_yaw, Box2D, Box3D, ObjectClass};
use super::{Result, SensorIoError};

/// Sequence-level weather label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Fog,
    LightRain,
    HeavyRain,
    LightSnow,
    HeavySnow,
}

impl Weather {
    pub const ALL: [Weather; 6] = [
        Weather::Clear,
        Weather::Fog,
        Weather::LightRain,
        Weather::HeavyRain,
        Weather::LightSnow,
        Weather::HeavySnow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Fog => "fog",
            Weather::LightRain => "light_rain",
            Weather::HeavyRain => "heavy_rain",
            Weather::LightSnow => "light_snow",
            Weather::HeavySnow => "heavy_snow",
        }
    }
}

/// Sequence-level lighting label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Light {
    Normal,
    LowLight,
    OverExpose,
    Hdr,
}

impl Light {
    pub const ALL: [Light; 4] = [Light::Normal, Light::LowLight, Light::OverExpose, Light::Hdr];

    pub fn as_str(self) -> &'static str {
        match self {
            Light::Normal => "normal",
            Light::LowLight => "low_light",
            Light::OverExpose => "over_expose",
            Light::Hdr => "hdr",
        }
    }
}

/// One weather and one light label per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionTags {
    pub weather: Weather,
    pub light: Light,
}

impl Default for ConditionTags {
    fn default() -> Self {
        ConditionTags {
            weather: Weather::Clear,
            light: Light::Normal,
        }
    }
}

/// Ego pose relative to the first frame of the sequence: rotation + translation.
#[derive(Debug, Clone, PartialEq)]
pub struct OdometryPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl OdometryPose {
    /// Validate (and, for drift below 1e-3, repair) the rotation part.
    /// The stored rotation is orthonormal with det +1 to machine precision.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let rotation = repair_rotation(rotation, 1e-3)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(SensorIoError::InvalidValue(
                "non-finite translation".to_string(),
            ));
        }
        Ok(OdometryPose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        OdometryPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// Repair a near-rotation matrix via polar decomposition, or reject it.
///
/// Matrices within `tol` of orthonormal (Frobenius drift of `R^T R - I`)
/// are snapped to the nearest rotation; anything farther is an error, as is
/// a negative determinant. Matrices already orthonormal to machine precision
/// pass through unchanged, keeping serialization round-trips bit-exact.
pub fn repair_rotation(r: Matrix3<f64>, tol: f64) -> Result<Matrix3<f64>> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(SensorIoError::InvalidValue(
            "non-finite rotation".to_string(),
        ));
    }
    let drift = orthonormal_drift(&r);
    if drift > tol {
        return Err(SensorIoError::NonOrthonormal { drift, tol });
    }
    if r.determinant() <= 0.0 {
        return Err(SensorIoError::InvalidValue(
            "rotation has non-positive determinant".to_string(),
        ));
    }
    if drift <= 1e-12 {
        return Ok(r);
    }
    Ok(polar_rotation(&r))
}

/// Full annotation payload for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    pub boxes3d: Vec<Box3D>,
    pub boxes2d: Vec<Box2D>,
    pub pose: OdometryPose,
    pub tags: ConditionTags,
}

#[derive(Serialize, Deserialize)]
struct Box3DWire {
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
    class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    track_id: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Box2DWire {
    u_min: f64,
    v_min: f64,
    w: f64,
    h: f64,
    class: String,
}

#[derive(Serialize, Deserialize)]
struct PoseWire {
    /// Row-major 3x3 rotation.
    r: Vec<f64>,
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AnnotationsWire {
    boxes_3d: Vec<Box3DWire>,
    boxes_2d: Vec<Box2DWire>,
    pose: PoseWire,
    weather: Weather,
    light: Light,
}

fn box3d_from_wire(w: &Box3DWire) -> Result<Box3D> {
    let class = ObjectClass::parse(&w.class)?;
    let mut b = Box3D::new([w.cx, w.cy, w.cz], [w.l, w.w, w.h], w.yaw, class)?;
    b.score = w.score;
    b.track_id = w.track_id;
    if let Some(s) = w.score {
        if !(0.0..=1.0).contains(&s) {
            return Err(SensorIoError::InvalidValue(format!(
                "score {s} outside [0, 1]"
            )));
        }
    }
    Ok(b)
}

/// Parse annotations from a JSON string. Yaw is renormalized on read and
/// the pose rotation repaired or rejected.
pub fn read_annotations_from_str(json: &str) -> Result<Annotations> {
    let wire: AnnotationsWire = serde_json::from_str(json)?;
    let boxes3d = wire
        .boxes_3d
        .iter()
        .map(box3d_from_wire)
        .collect::<Result<Vec<_>>>()?;
    let boxes2d = wire
        .boxes_2d
        .iter()
        .map(|w| Box2D::new(w.u_min, w.v_min, w.w, w.h, ObjectClass::parse(&w.class)?))
        .collect::<Result<Vec<_>>>()?;
    if wire.pose.r.len() != 9 {
        return Err(SensorIoError::MissingField("pose.r[9]".to_string()));
    }
    if wire.pose.t.len() != 3 {
        return Err(SensorIoError::MissingField("pose.t[3]".to_string()));
    }
    let rotation = Matrix3::from_row_slice(&wire.pose.r);
    let translation = Vector3::new(wire.pose.t[0], wire.pose.t[1], wire.pose.t[2]);
    Ok(Annotations {
        boxes3d,
        boxes2d,
        pose: OdometryPose::new(rotation, translation)?,
        tags: ConditionTags {
            weather: wire.weather,
            light: wire.light,
        },
    })
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Annotations> {
    let json = std::fs::read_to_string(path)?;
    read_annotations_from_str(&json)
}

fn to_wire(ann: &Annotations) -> AnnotationsWire {
    AnnotationsWire {
        boxes_3d: ann
            .boxes3d
            .iter()
            .map(|b| Box3DWire {
                cx: b.cx,
                cy: b.cy,
                cz: b.cz,
                l: b.l,
                w: b.w,
                h: b.h,
                yaw: normalize_yaw(b.yaw),
                class: b.class.as_str().to_string(),
                score: b.score,
                track_id: b.track_id,
            })
            .collect(),
        boxes_2d: ann
            .boxes2d
            .iter()
            .map(|b| Box2DWire {
                u_min: b.u_min,
                v_min: b.v_min,
                w: b.w,
                h: b.h,
                class: b.class.as_str().to_string(),
            })
            .collect(),
        pose: PoseWire {
            r: ann.pose.rotation.transpose().as_slice().to_vec(),
            t: ann.pose.translation.as_slice().to_vec(),
        },
        weather: ann.tags.weather,
        light: ann.tags.light,
    }
}

pub fn write_annotations(ann: &Annotations, path: impl AsRef<Path>) -> Result<()> {
    let wire = to_wire(ann);
    let json = serde_json::to_string_pretty(&wire)?;
    std::fs::write(path, json)?;
    Ok(())
}
