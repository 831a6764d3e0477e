use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::RefinementConfig;
use crate::fusion::{BackboneStub, BranchWeights, FfnWeights};
use crate::nn::Conv2d;
use crate::sensorio::ImageModality;
use crate::voxelize::{FusionProjector, LiftWeights};

use super::config::{RunConfig, WeightsInit};
use super::{PipelineError, Result};

/// Every learned (here: stubbed) parameter of the pipeline, loadable from a
/// single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineWeights {
    pub lift_lidar: LiftWeights,
    pub lift_radar: LiftWeights,
    pub projector: FusionProjector,
    /// Per-modality BEV conv stacks (empty = raw collapsed map).
    pub bev_convs_lidar: Vec<Conv2d>,
    pub bev_convs_radar: Vec<Conv2d>,
    /// 3x3 conv fusing the concatenated BEV maps; present when both range
    /// sensors can be enabled.
    pub bev_fusion_conv: Conv2d,
    pub stubs: BTreeMap<ImageModality, BackboneStub>,
    pub branches: BTreeMap<ImageModality, BranchWeights>,
    /// Final fusion FFN sized for the enabled camera count.
    pub ffn: FfnWeights,
    pub refinement: RefinementConfig,
}

impl PipelineWeights {
    /// Identity-style configuration: passthrough union projector, raw BEV
    /// collapse, zero camera stubs/branches (pure residual), FFN selecting
    /// the original features, zero refinement head.
    pub fn identity(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.grid.to_spec()?;
        let c_v = spec.c_v;
        let cameras = cfg.enabled_cameras();
        let mut stubs = BTreeMap::new();
        let mut branches = BTreeMap::new();
        for m in &cameras {
            stubs.insert(*m, BackboneStub::zeros(*m, cfg.c_i));
            branches.insert(*m, BranchWeights::zeros(c_v, cfg.c_i, c_v, cfg.samples));
        }
        Ok(PipelineWeights {
            lift_lidar: LiftWeights::identity_like(c_v, 1),
            lift_radar: LiftWeights::identity_like(c_v, 2),
            projector: FusionProjector::select_first(c_v),
            bev_convs_lidar: Vec::new(),
            bev_convs_radar: Vec::new(),
            bev_fusion_conv: Conv2d::center_identity(c_v, 2 * c_v),
            stubs,
            branches,
            ffn: FfnWeights::passthrough_original(c_v, cameras.len()),
            refinement: RefinementConfig::identity(cfg.refine_grid, c_v, spec.voxel_size[0]),
        })
    }

    /// Seeded random initialization of every stage; the refinement head
    /// stays identity unless `cfg.seeded_refinement` is set.
    pub fn seeded(cfg: &RunConfig, seed: u64) -> Result<Self> {
        let spec = cfg.grid.to_spec()?;
        let c_v = spec.c_v;
        let cameras = cfg.enabled_cameras();
        let mut stubs = BTreeMap::new();
        let mut branches = BTreeMap::new();
        for (i, m) in cameras.iter().enumerate() {
            let s = seed.wrapping_add(1000 + 10 * i as u64);
            stubs.insert(*m, BackboneStub::seeded(*m, cfg.c_i, s));
            branches.insert(
                *m,
                BranchWeights::seeded(c_v, cfg.c_i, c_v, cfg.samples, s.wrapping_add(5)),
            );
        }
        let refinement = if cfg.seeded_refinement {
            RefinementConfig::seeded(
                cfg.refine_grid,
                c_v,
                spec.voxel_size[0],
                seed.wrapping_add(7),
            )
        } else {
            RefinementConfig::identity(cfg.refine_grid, c_v, spec.voxel_size[0])
        };
        Ok(PipelineWeights {
            lift_lidar: LiftWeights::seeded(c_v, 1, seed.wrapping_add(1)),
            lift_radar: LiftWeights::seeded(c_v, 2, seed.wrapping_add(2)),
            projector: FusionProjector::seeded(c_v, seed.wrapping_add(3)),
            bev_convs_lidar: vec![
                Conv2d::seeded(spec.c_b, c_v, 3, 1, 1, seed.wrapping_add(4)).with_relu(true)
            ],
            bev_convs_radar: vec![
                Conv2d::seeded(spec.c_b, c_v, 3, 1, 1, seed.wrapping_add(5)).with_relu(true)
            ],
            bev_fusion_conv: Conv2d::seeded(spec.c_b, 2 * spec.c_b, 3, 1, 1, seed.wrapping_add(6))
                .with_relu(true),
            stubs,
            branches,
            ffn: FfnWeights::seeded(c_v, cameras.len(), seed.wrapping_add(8)),
            refinement,
        })
    }

    /// Resolve the configured weight source.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        match cfg.weights.clone().unwrap_or(WeightsInit::Identity) {
            WeightsInit::Identity => PipelineWeights::identity(cfg),
            WeightsInit::Seeded(seed) => PipelineWeights::seeded(cfg, seed),
            WeightsInit::File(path) => PipelineWeights::load(path),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::InvalidConfig(format!("weights file: {e}")))?;
        serde_json::from_str(&json)
            .map_err(|e| PipelineError::InvalidConfig(format!("weights JSON: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(self)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        std::fs::write(path, json)
            .map_err(|e| PipelineError::InvalidConfig(format!("weights file: {e}")))
    }
}
