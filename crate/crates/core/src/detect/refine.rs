use crate::nn::{sigmoid, Mlp};
use crate::sensorio::{normalize_yaw, Box3D};

use super::propose::ProposalSet;
use super::{DetectError, Result};

/// Refinement stage configuration: grid size, pooling radius, and the MLP
/// head mapping `S^3 * 2 C_V` grid features to 7 box deltas plus a
/// confidence logit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefinementConfig {
    /// Sub-voxel grid size S per box axis.
    pub grid_size: usize,
    /// Neighbor gathering radius, meters.
    pub radius: f64,
    pub head: Mlp,
}

impl RefinementConfig {
    /// Zero-weight head: geometry unchanged, confidence 0.5. The default
    /// radius is the voxel diagonal.
    pub fn identity(grid_size: usize, c_v: usize, voxel_size: f64) -> Self {
        let in_dim = grid_size.pow(3) * 2 * c_v;
        RefinementConfig {
            grid_size,
            radius: 3f64.sqrt() * voxel_size,
            head: Mlp::zeros(8, 2 * c_v, in_dim),
        }
    }

    pub fn seeded(grid_size: usize, c_v: usize, voxel_size: f64, seed: u64) -> Self {
        let in_dim = grid_size.pow(3) * 2 * c_v;
        RefinementConfig {
            grid_size,
            radius: 3f64.sqrt() * voxel_size,
            head: Mlp::seeded(8, 2 * c_v, in_dim, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 {
            return Err(DetectError::InvalidArgument(
                "grid size must be >= 1".to_string(),
            ));
        }
        if self.radius <= 0.0 {
            return Err(DetectError::InvalidArgument(
                "radius must be positive".to_string(),
            ));
        }
        self.head.validate()?;
        if self.head.output.out_dim != 8 {
            return Err(DetectError::ShapeMismatch(
                "refinement head must emit 7 deltas + 1 logit".to_string(),
            ));
        }
        Ok(())
    }
}

/// Apply the refinement head to each proposal's pooled grid features.
///
/// Residual update: center += dxyz; extents *= exp(dlwh); yaw += dyaw
/// (renormalized); confidence = sigmoid(logit) replaces the score.
pub fn refine_boxes(
    proposals: &ProposalSet,
    grid_features: &[Vec<f64>],
    cfg: &RefinementConfig,
) -> Result<ProposalSet> {
    cfg.validate()?;
    if grid_features.len() != proposals.len() {
        return Err(DetectError::ShapeMismatch(format!(
            "{} feature rows for {} proposals",
            grid_features.len(),
            proposals.len()
        )));
    }
    let mut boxes = Vec::with_capacity(proposals.len());
    for (b, feats) in proposals.boxes.iter().zip(grid_features) {
        let out = cfg.head.forward(feats)?;
        let refined = Box3D::new(
            [b.cx + out[0], b.cy + out[1], b.cz + out[2]],
            [
                b.l * out[3].exp(),
                b.w * out[4].exp(),
                b.h * out[5].exp(),
            ],
            normalize_yaw(b.yaw + out[6]),
            b.class,
        )
        .map_err(|e| DetectError::InvalidArgument(e.to_string()))?
        .with_score(sigmoid(out[7]));
        boxes.push(match b.track_id {
            Some(id) => refined.with_track_id(id),
            None => refined,
        });
    }
    Ok(ProposalSet {
        boxes,
        capacity: proposals.capacity,
    })
}
