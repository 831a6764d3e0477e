use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::sensorio::{PointCloud, RangeBox, Sensor};

use super::{Result, SynthError};

/// Weather degradation model for range sensors: per-point dropout scaled by
/// range, plus uniform low-power clutter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherModel {
    /// Base dropout probability in [0, 1].
    pub p_drop: f64,
    /// Mean clutter points per frame (Poisson rate).
    pub clutter_rate: f64,
    /// Range attenuation factor per meter; the effective dropout is
    /// `min(1, p_drop * (1 + attenuation * range))`.
    pub attenuation: f64,
}

impl WeatherModel {
    pub fn clear() -> Self {
        WeatherModel {
            p_drop: 0.0,
            clutter_rate: 0.0,
            attenuation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_drop) {
            return Err(SynthError::InvalidSpec(format!(
                "p_drop {} outside [0, 1]",
                self.p_drop
            )));
        }
        if self.clutter_rate < 0.0 || self.attenuation < 0.0 {
            return Err(SynthError::InvalidSpec(
                "clutter rate and attenuation must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

const CLUTTER_FEATURE: f32 = 0.05;

/// Degrade a point cloud: drop each point with probability
/// `min(1, p_drop * (1 + attenuation * range))`, then append a
/// Poisson-distributed count of uniform low-power clutter points inside the
/// clutter range. Deterministic per seed.
pub fn apply_weather(
    cloud: &PointCloud,
    wm: &WeatherModel,
    clutter_range: &RangeBox,
    seed: u64,
) -> Result<PointCloud> {
    wm.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(cloud.len());
    let mut features = Vec::with_capacity(cloud.len());
    for (p, f) in cloud.points.iter().zip(&cloud.features) {
        let range = (f64::from(p[0]).powi(2) + f64::from(p[1]).powi(2) + f64::from(p[2]).powi(2))
            .sqrt();
        let drop_p = (wm.p_drop * (1.0 + wm.attenuation * range)).min(1.0);
        if rng.gen_range(0.0..1.0) >= drop_p {
            points.push(*p);
            features.push(f.clone());
        }
    }
    if wm.clutter_rate > 0.0 {
        let poisson = Poisson::new(wm.clutter_rate)
            .map_err(|e| SynthError::InvalidSpec(format!("poisson rate: {e}")))?;
        let count = poisson.sample(&mut rng) as usize;
        let dim = cloud.sensor.feature_dim();
        for _ in 0..count {
            let p = [
                rng.gen_range(clutter_range.min[0]..clutter_range.max[0]) as f32,
                rng.gen_range(clutter_range.min[1]..clutter_range.max[1]) as f32,
                rng.gen_range(clutter_range.min[2]..clutter_range.max[2]) as f32,
            ];
            let mut f = vec![CLUTTER_FEATURE; dim];
            if cloud.sensor == Sensor::Radar4d {
                f[1] = rng.gen_range(-1.0..1.0) as f32;
            }
            points.push(p);
            features.push(f);
        }
    }
    Ok(PointCloud::new(cloud.sensor, points, features)?)
}
