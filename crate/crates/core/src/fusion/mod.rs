//! Camera-to-voxel fusion: 2D backbone stubs, voxel-centric deformable
//! sampling with cross-attention, camera-wise confidence gating, and the
//! final feed-forward fusion producing the enhanced voxel features.

mod backbone;
mod enhance;
mod gate;
mod head;

pub use backbone::{extract_image_features, BackboneStub, ImageFeatureMap};
pub use enhance::{
    attention, attention_query_jacobian, deformable_aggregate, enhance_voxels, AttentionMode,
    EnhanceParams, SampledFeatures,
};
pub use gate::{gate_and_reweight, gate_gradient, GateOutput};
pub use head::{fuse_final, FfnWeights};

use serde::{Deserialize, Serialize};

use crate::nn::Linear;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("empty input: {0}")]
    Empty(String),
}

impl From<crate::nn::NnError> for FusionError {
    fn from(e: crate::nn::NnError) -> Self {
        match e {
            crate::nn::NnError::ShapeMismatch(m) => FusionError::ShapeMismatch(m),
            crate::nn::NnError::InvalidWeights(m) => FusionError::InvalidWeights(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, FusionError>;

/// Learned parameters for one camera branch of the voxel-centric sampler:
/// the offset/weight predictor plus query/key/value/output projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchWeights {
    /// `C_V -> Q * 3`: per sample point, (du, dv, weight logit).
    pub offset_predictor: Linear,
    /// `C_V -> d` query projection.
    pub w_query: Linear,
    /// `C_I -> d` key projection.
    pub w_key: Linear,
    /// `C_I -> d` value projection.
    pub w_value: Linear,
    /// `d -> C_V` output projection.
    pub w_out: Linear,
    /// Sample count Q.
    pub samples: usize,
}

impl BranchWeights {
    pub fn seeded(c_v: usize, c_i: usize, d: usize, samples: usize, seed: u64) -> Self {
        BranchWeights {
            offset_predictor: Linear::seeded(samples * 3, c_v, seed),
            w_query: Linear::seeded(d, c_v, seed.wrapping_add(1)),
            w_key: Linear::seeded(d, c_i, seed.wrapping_add(2)),
            w_value: Linear::seeded(d, c_i, seed.wrapping_add(3)),
            w_out: Linear::seeded(c_v, d, seed.wrapping_add(4)),
            samples,
        }
    }

    /// All-zero branch: zero offsets, uniform sampling weights, zero image
    /// contribution, so enhancement reduces to the residual.
    pub fn zeros(c_v: usize, c_i: usize, d: usize, samples: usize) -> Self {
        BranchWeights {
            offset_predictor: Linear::zeros(samples * 3, c_v),
            w_query: Linear::zeros(d, c_v),
            w_key: Linear::zeros(d, c_i),
            w_value: Linear::zeros(d, c_i),
            w_out: Linear::zeros(c_v, d),
            samples,
        }
    }

    pub fn validate(&self, c_v: usize, c_i: usize) -> Result<()> {
        for l in [
            &self.offset_predictor,
            &self.w_query,
            &self.w_key,
            &self.w_value,
            &self.w_out,
        ] {
            l.validate()?;
        }
        if self.offset_predictor.in_dim != c_v
            || self.offset_predictor.out_dim != self.samples * 3
        {
            return Err(FusionError::ShapeMismatch(
                "offset predictor must be C_V -> Q*3".to_string(),
            ));
        }
        if self.w_query.in_dim != c_v || self.w_key.in_dim != c_i || self.w_value.in_dim != c_i {
            return Err(FusionError::ShapeMismatch(
                "projection input widths must be (C_V, C_I, C_I)".to_string(),
            ));
        }
        let d = self.w_query.out_dim;
        if self.w_key.out_dim != d || self.w_value.out_dim != d || self.w_out.in_dim != d {
            return Err(FusionError::ShapeMismatch(
                "attention width d must agree across projections".to_string(),
            ));
        }
        if self.w_out.out_dim != c_v {
            return Err(FusionError::ShapeMismatch(
                "output projection must map d -> C_V".to_string(),
            ));
        }
        Ok(())
    }
}
