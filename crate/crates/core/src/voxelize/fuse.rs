use crate::nn::Linear;

use super::grid::SparseVoxelSet;
use super::{Result, VoxelizeError};

/// Linear projector applied where both modalities occupy a voxel: maps the
/// concatenated `2 C_V` channels back to `C_V`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionProjector(pub Linear);

impl FusionProjector {
    pub fn seeded(c_v: usize, seed: u64) -> Self {
        FusionProjector(Linear::seeded(c_v, 2 * c_v, seed))
    }

    /// `P = [I | 0]` with zero bias: selects the first (LiDAR) block.
    pub fn select_first(c_v: usize) -> Self {
        FusionProjector(Linear::identity_like(c_v, 2 * c_v))
    }
}

/// Fuse two sparse voxel sets over the union of their occupied indices.
///
/// A voxel seen by only one modality keeps that modality's feature
/// unchanged; a voxel seen by both gets the projected concatenation
/// `P [f_lidar | f_radar]`.
pub fn union_fuse(
    set_lidar: &SparseVoxelSet,
    set_radar: &SparseVoxelSet,
    proj: &FusionProjector,
) -> Result<SparseVoxelSet> {
    if set_lidar.spec != set_radar.spec {
        return Err(VoxelizeError::SpecMismatch(
            "union fusion requires identical grid specs".to_string(),
        ));
    }
    let c_v = set_lidar.spec.c_v;
    if proj.0.in_dim != 2 * c_v || proj.0.out_dim != c_v {
        return Err(VoxelizeError::ShapeMismatch(format!(
            "projector is {}x{}, needs {}x{}",
            proj.0.out_dim,
            proj.0.in_dim,
            c_v,
            2 * c_v
        )));
    }
    let mut out = SparseVoxelSet::empty(set_lidar.spec.clone());
    for (idx, f_l) in &set_lidar.entries {
        match set_radar.entries.get(idx) {
            None => out.insert(*idx, f_l.clone())?,
            Some(f_r) => {
                let mut cat = Vec::with_capacity(2 * c_v);
                cat.extend_from_slice(f_l);
                cat.extend_from_slice(f_r);
                out.insert(*idx, proj.0.forward(&cat)?)?;
            }
        }
    }
    for (idx, f_r) in &set_radar.entries {
        if !set_lidar.entries.contains_key(idx) {
            out.insert(*idx, f_r.clone())?;
        }
    }
    Ok(out)
}
