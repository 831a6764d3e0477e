use serde::{Deserialize, Serialize};

use super::{Result, SensorIoError};

/// Object categories annotated in the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    Bike,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [
        ObjectClass::Vehicle,
        ObjectClass::Pedestrian,
        ObjectClass::Bike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Bike => "bike",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vehicle" => Ok(ObjectClass::Vehicle),
            "pedestrian" => Ok(ObjectClass::Pedestrian),
            "bike" => Ok(ObjectClass::Bike),
            other => Err(SensorIoError::UnknownClass(other.to_string())),
        }
    }
}

/// Map any real yaw into the canonical interval `(-pi, pi]`.
///
/// Idempotent; `3*pi/2` maps to `-pi/2`, `-pi` maps to `pi`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = yaw.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Oriented 3D bounding box: center, extents, yaw about +Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    /// Center x, meters.
    pub cx: f64,
    /// Center y, meters.
    pub cy: f64,
    /// Center z, meters.
    pub cz: f64,
    /// Extent along the heading axis, meters.
    pub l: f64,
    /// Extent lateral to the heading axis, meters.
    pub w: f64,
    /// Vertical extent, meters.
    pub h: f64,
    /// Heading about +Z, radians, normalized to `(-pi, pi]`.
    pub yaw: f64,
    pub class: ObjectClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
}

impl Box3D {
    /// Build a box, normalizing yaw. Extents must be strictly positive
    /// and all fields finite.
    pub fn new(
        center: [f64; 3],
        extents: [f64; 3],
        yaw: f64,
        class: ObjectClass,
    ) -> Result<Self> {
        let [cx, cy, cz] = center;
        let [l, w, h] = extents;
        for v in [cx, cy, cz, l, w, h, yaw] {
            if !v.is_finite() {
                return Err(SensorIoError::InvalidValue(
                    "non-finite box field".to_string(),
                ));
            }
        }
        if l <= 0.0 || w <= 0.0 || h <= 0.0 {
            return Err(SensorIoError::InvalidValue(format!(
                "box extents must be positive, got ({l}, {w}, {h})"
            )));
        }
        Ok(Box3D {
            cx,
            cy,
            cz,
            l,
            w,
            h,
            yaw: normalize_yaw(yaw),
            class,
            score: None,
            track_id: None,
        })
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_track_id(mut self, id: u64) -> Self {
        self.track_id = Some(id);
        self
    }

    /// Volume `l*w*h`.
    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    /// Planar distance of the box center from the origin.
    pub fn bev_range(&self) -> f64 {
        (self.cx * self.cx + self.cy * self.cy).sqrt()
    }
}

/// Axis-aligned 2D image-plane box: top-left corner plus size in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub u_min: f64,
    pub v_min: f64,
    pub w: f64,
    pub h: f64,
    pub class: ObjectClass,
}

impl Box2D {
    pub fn new(u_min: f64, v_min: f64, w: f64, h: f64, class: ObjectClass) -> Result<Self> {
        for v in [u_min, v_min, w, h] {
            if !v.is_finite() {
                return Err(SensorIoError::InvalidValue(
                    "non-finite 2D box field".to_string(),
                ));
            }
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(SensorIoError::InvalidValue(format!(
                "2D box size must be positive, got ({w}, {h})"
            )));
        }
        Ok(Box2D {
            u_min,
            v_min,
            w,
            h,
            class,
        })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}
