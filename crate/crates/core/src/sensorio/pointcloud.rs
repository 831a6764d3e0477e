use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SensorIoError};

/// Range sensors producing 3D point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    LidarLong,
    LidarShort,
    Radar4d,
}

impl Sensor {
    fn tag(self) -> u8 {
        match self {
            Sensor::LidarLong => 0,
            Sensor::LidarShort => 1,
            Sensor::Radar4d => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Sensor::LidarLong),
            1 => Ok(Sensor::LidarShort),
            2 => Ok(Sensor::Radar4d),
            other => Err(SensorIoError::UnknownTag(other)),
        }
    }

    /// Per-point feature arity: intensity for LiDAR, power + Doppler for radar.
    pub fn feature_dim(self) -> usize {
        match self {
            Sensor::LidarLong | Sensor::LidarShort => 1,
            Sensor::Radar4d => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::LidarLong => "lidar_long",
            Sensor::LidarShort => "lidar_short",
            Sensor::Radar4d => "radar4d",
        }
    }
}

/// Ordered set of 3D points with per-point features, tagged by source sensor.
///
/// Coordinates and features are stored as `f32`, matching the on-disk format
/// so that write/read round-trips are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub sensor: Sensor,
    pub points: Vec<[f32; 3]>,
    /// One feature vector per point, all of length `feature_dim()`.
    pub features: Vec<Vec<f32>>,
}

impl PointCloud {
    pub fn new(sensor: Sensor, points: Vec<[f32; 3]>, features: Vec<Vec<f32>>) -> Result<Self> {
        if points.len() != features.len() {
            return Err(SensorIoError::InvalidValue(format!(
                "feature count {} does not match point count {}",
                features.len(),
                points.len()
            )));
        }
        let dim = sensor.feature_dim();
        for (p, f) in points.iter().zip(&features) {
            if f.len() != dim {
                return Err(SensorIoError::InvalidValue(format!(
                    "feature arity {} does not match sensor arity {dim}",
                    f.len()
                )));
            }
            if !p.iter().all(|v| v.is_finite()) || !f.iter().all(|v| v.is_finite()) {
                return Err(SensorIoError::InvalidValue(
                    "non-finite point or feature".to_string(),
                ));
            }
        }
        Ok(PointCloud {
            sensor,
            points,
            features,
        })
    }

    pub fn empty(sensor: Sensor) -> Self {
        PointCloud {
            sensor,
            points: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned range, half-open per axis: a point is inside iff
/// `min <= c < max` for every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl RangeBox {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(min[a] < max[a]) {
                return Err(SensorIoError::InvalidValue(format!(
                    "range min must be < max per axis, got [{}, {}) on axis {a}",
                    min[a], max[a]
                )));
            }
        }
        Ok(RangeBox { min, max })
    }

    /// Default 3D detection range: x in [0, 75.2), y in [-75.2, 75.2),
    /// z in [-2, 4) meters.
    pub fn detection_default() -> Self {
        RangeBox {
            min: [0.0, -75.2, -2.0],
            max: [75.2, 75.2, 4.0],
        }
    }

    pub fn contains(&self, p: [f32; 3]) -> bool {
        (0..3).all(|a| {
            let c = p[a] as f64;
            self.min[a] <= c && c < self.max[a]
        })
    }
}

/// Keep only points inside the half-open range; features stay in lockstep.
pub fn filter_to_range(cloud: &PointCloud, range: &RangeBox) -> PointCloud {
    let mut points = Vec::new();
    let mut features = Vec::new();
    for (p, f) in cloud.points.iter().zip(&cloud.features) {
        if range.contains(*p) {
            points.push(*p);
            features.push(f.clone());
        }
    }
    PointCloud {
        sensor: cloud.sensor,
        points,
        features,
    }
}

const MAGIC: [u8; 4] = *b"DSRT";
const VERSION: u32 = 1;

/// Serialize a point cloud to the binary format:
/// magic `DSRT`, version u32 LE, sensor tag u8, feature arity u8,
/// point count u64 LE, then `count * (3 + arity)` f32 LE.
pub fn write_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(18 + cloud.len() * (3 + cloud.sensor.feature_dim()) * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(cloud.sensor.tag());
    buf.push(cloud.sensor.feature_dim() as u8);
    buf.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for (p, f) in cloud.points.iter().zip(&cloud.features) {
        for v in p {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in f {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Deserialize a point cloud written by [`write_point_cloud`].
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_point_cloud(&bytes)
}

fn parse_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() < 4 {
        return Err(SensorIoError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != MAGIC {
        return Err(SensorIoError::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    if bytes.len() < 18 {
        return Err(SensorIoError::Truncated {
            needed: 18,
            available: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(SensorIoError::VersionMismatch {
            found: version,
            supported: VERSION,
        });
    }
    let sensor = Sensor::from_tag(bytes[8])?;
    let arity = bytes[9] as usize;
    if arity != sensor.feature_dim() {
        return Err(SensorIoError::InvalidValue(format!(
            "feature arity {arity} does not match sensor {}",
            sensor.as_str()
        )));
    }
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    let needed = 18 + count * (3 + arity) * 4;
    if bytes.len() < needed {
        return Err(SensorIoError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    let mut points = Vec::with_capacity(count);
    let mut features = Vec::with_capacity(count);
    let mut off = 18;
    let read_f32 = |off: &mut usize| {
        let v = f32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap());
        *off += 4;
        v
    };
    for _ in 0..count {
        let p = [
            read_f32(&mut off),
            read_f32(&mut off),
            read_f32(&mut off),
        ];
        let f = (0..arity).map(|_| read_f32(&mut off)).collect();
        points.push(p);
        features.push(f);
    }
    PointCloud::new(sensor, points, features)
}
