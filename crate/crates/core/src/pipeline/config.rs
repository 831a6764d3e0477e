use serde::{Deserialize, Serialize};

use crate::eval::ClassThresholds;
use crate::sensorio::{ImageModality, RangeBox, Sensor};
use crate::voxelize::VoxelGridSpec;

use super::{PipelineError, Result};

/// Sensor modality flags: RGB, Event, Thermal cameras, 4D radar, LiDAR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    R,
    E,
    T,
    #[serde(rename = "4R")]
    FourR,
    L,
}

impl Modality {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "R" => Ok(Modality::R),
            "E" => Ok(Modality::E),
            "T" => Ok(Modality::T),
            "4R" => Ok(Modality::FourR),
            "L" => Ok(Modality::L),
            other => Err(PipelineError::InvalidConfig(format!(
                "unknown modality `{other}` (expected R, E, T, 4R, or L)"
            ))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Modality>> {
        s.split(',').map(Modality::parse).collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::R => "R",
            Modality::E => "E",
            Modality::T => "T",
            Modality::FourR => "4R",
            Modality::L => "L",
        }
    }

    /// The camera image modality this flag selects, if it is a camera.
    pub fn camera(self) -> Option<ImageModality> {
        match self {
            Modality::R => Some(ImageModality::Rgb),
            Modality::T => Some(ImageModality::Thermal),
            Modality::E => Some(ImageModality::EventGrid),
            _ => None,
        }
    }

    /// The range sensor this flag selects, if it is one.
    pub fn range_sensor(self) -> Option<Sensor> {
        match self {
            Modality::L => Some(Sensor::LidarLong),
            Modality::FourR => Some(Sensor::Radar4d),
            _ => None,
        }
    }
}

/// Extrinsic perturbation applied to camera calibrations before fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_t_m: f64,
    pub sigma_r_deg: f64,
    /// Camera modalities the noise applies to.
    pub mask: Vec<Modality>,
    pub seed: u64,
}

/// How pipeline weights are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsInit {
    /// Identity-style configuration: passthrough fusion, zero camera
    /// contribution, identity refinement.
    Identity,
    /// Seeded random initialization (uniform +-1/sqrt(fan_in)).
    Seeded(u64),
    /// Load weights from a JSON file.
    File(String),
}

fn default_samples() -> usize {
    4
}
fn default_refine_grid() -> usize {
    6
}
fn default_capacity() -> usize {
    128
}
fn default_nms() -> f64 {
    0.7
}
fn default_occupancy() -> u32 {
    3
}
fn default_c_i() -> usize {
    8
}
fn default_event_bins() -> usize {
    5
}
fn default_eval_x() -> [f64; 2] {
    [0.0, 70.0]
}

/// Grid geometry as plain config fields, resolved to a [`VoxelGridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub range_min: [f64; 3],
    pub range_max: [f64; 3],
    pub voxel_size: [f64; 3],
    pub bev_stride: u32,
    pub c_v: usize,
    pub c_b: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            range_min: [0.0, -75.2, -2.0],
            range_max: [75.2, 75.2, 4.0],
            voxel_size: [0.4; 3],
            bev_stride: 2,
            c_v: 32,
            c_b: 64,
        }
    }
}

impl GridConfig {
    pub fn to_spec(&self) -> Result<VoxelGridSpec> {
        let range = RangeBox::new(self.range_min, self.range_max)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        VoxelGridSpec::new(range, self.voxel_size, self.bev_stride, self.c_v, self.c_b)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

/// Full run configuration. Serializable so runs are reproducible from one
/// JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    /// Enabled modalities; must include at least one range sensor.
    pub modalities: Vec<Modality>,
    /// Deformable sampling point count Q.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Box refinement grid size S.
    #[serde(default = "default_refine_grid")]
    pub refine_grid: usize,
    /// Proposal capacity n.
    #[serde(default = "default_capacity")]
    pub proposal_capacity: usize,
    /// NMS IoU threshold.
    #[serde(default = "default_nms")]
    pub nms_iou: f64,
    /// Per-class AP matching thresholds.
    #[serde(default)]
    pub thresholds: ClassThresholds,
    /// Minimum points per BEV cell for the proposer.
    #[serde(default = "default_occupancy")]
    pub occupancy_threshold: u32,
    /// Image feature channels C_I.
    #[serde(default = "default_c_i")]
    pub c_i: usize,
    #[serde(default)]
    pub weights: Option<WeightsInit>,
    /// Seed the refinement head too (default keeps it identity).
    #[serde(default)]
    pub seeded_refinement: bool,
    #[serde(default)]
    pub extrinsic_noise: Option<NoiseConfig>,
    /// Evaluation X interval; boxes centered outside are not scored.
    #[serde(default = "default_eval_x")]
    pub eval_x_range: [f64; 2],
    /// Event accumulation window override (microseconds).
    #[serde(default)]
    pub event_window_us: Option<(i64, i64)>,
    /// Temporal bins of the event voxel grid.
    #[serde(default = "default_event_bins")]
    pub event_bins: usize,
}

impl RunConfig {
    /// Minimal config for a modality subset with identity-style weights.
    pub fn for_modalities(modalities: Vec<Modality>) -> Self {
        RunConfig {
            grid: GridConfig::default(),
            modalities,
            samples: default_samples(),
            refine_grid: default_refine_grid(),
            proposal_capacity: default_capacity(),
            nms_iou: default_nms(),
            thresholds: ClassThresholds::default(),
            occupancy_threshold: default_occupancy(),
            c_i: default_c_i(),
            weights: Some(WeightsInit::Identity),
            seeded_refinement: false,
            extrinsic_noise: None,
            eval_x_range: default_eval_x(),
            event_window_us: None,
            event_bins: default_event_bins(),
        }
    }

    pub fn enabled_cameras(&self) -> Vec<ImageModality> {
        // fixed channel order: RGB, thermal, event
        [Modality::R, Modality::T, Modality::E]
            .iter()
            .filter(|m| self.modalities.contains(m))
            .filter_map(|m| m.camera())
            .collect()
    }

    pub fn enabled_range_sensors(&self) -> Vec<Sensor> {
        [Modality::L, Modality::FourR]
            .iter()
            .filter(|m| self.modalities.contains(m))
            .filter_map(|m| m.range_sensor())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled_range_sensors().is_empty() {
            return Err(PipelineError::InvalidConfig(
                "at least one range sensor (L or 4R) must be enabled".to_string(),
            ));
        }
        if self.samples == 0 || self.refine_grid == 0 || self.proposal_capacity == 0 {
            return Err(PipelineError::InvalidConfig(
                "samples, refine grid, and capacity must be positive".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(PipelineError::InvalidConfig(format!(
                "NMS IoU {} outside [0, 1]",
                self.nms_iou
            )));
        }
        if self.eval_x_range[0] >= self.eval_x_range[1] {
            return Err(PipelineError::InvalidConfig(
                "eval X range must be non-empty".to_string(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.modalities {
            if !seen.insert(*m) {
                return Err(PipelineError::InvalidConfig(format!(
                    "duplicate modality {}",
                    m.as_str()
                )));
            }
        }
        self.grid.to_spec().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modality_list_parses() {
        let all = Modality::parse_list("R,E,T,4R,L").unwrap();
        assert_eq!(
            all,
            vec![
                Modality::R,
                Modality::E,
                Modality::T,
                Modality::FourR,
                Modality::L
            ]
        );
        assert!(Modality::parse_list("R,X").is_err());
    }

    #[test]
    fn config_requires_a_range_sensor() {
        let cfg = RunConfig::for_modalities(vec![Modality::R]);
        assert!(cfg.validate().is_err());
        let ok = RunConfig::for_modalities(vec![Modality::L]);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn camera_order_is_rgb_thermal_event() {
        let cfg = RunConfig::for_modalities(vec![
            Modality::E,
            Modality::L,
            Modality::R,
            Modality::T,
        ]);
        assert_eq!(
            cfg.enabled_cameras(),
            vec![
                ImageModality::Rgb,
                ImageModality::Thermal,
                ImageModality::EventGrid
            ]
        );
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::for_modalities(vec![Modality::L, Modality::FourR, Modality::R]);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
