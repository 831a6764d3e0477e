use crate::nn::{pairwise_sum, sigmoid, sigmoid_prime};

use super::{FusionError, Result};

/// Gated camera branches: one scalar gate per camera plus the reweighted
/// feature blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOutput {
    /// One gate in (0, 1) per camera branch.
    pub gates: Vec<f64>,
    /// Per camera: `N_V x C_V` block scaled by its gate.
    pub reweighted: Vec<Vec<Vec<f64>>>,
}

/// Camera-wise confidence gating from a global summary.
///
/// For each camera block (all `N_V x C_V` enhanced features of one branch),
/// the gate is the sigmoid of the mean over every entry; the block is then
/// scaled by that scalar. The mean uses pairwise summation so the result is
/// independent of any sharding of the voxel axis.
pub fn gate_and_reweight(blocks: &[Vec<Vec<f64>>]) -> Result<GateOutput> {
    if blocks.is_empty() {
        return Err(FusionError::Empty("no camera blocks".to_string()));
    }
    let n_v = blocks[0].len();
    if n_v == 0 {
        return Err(FusionError::Empty(
            "gating undefined with zero voxels".to_string(),
        ));
    }
    let c_v = blocks[0][0].len();
    for (m, block) in blocks.iter().enumerate() {
        if block.len() != n_v || block.iter().any(|row| row.len() != c_v) {
            return Err(FusionError::ShapeMismatch(format!(
                "camera block {m} is not {n_v} x {c_v}"
            )));
        }
    }
    let mut gates = Vec::with_capacity(blocks.len());
    let mut reweighted = Vec::with_capacity(blocks.len());
    let denom = (n_v * c_v) as f64;
    for block in blocks {
        let flat: Vec<f64> = block.iter().flatten().copied().collect();
        let mean = pairwise_sum(&flat) / denom;
        let gate = sigmoid(mean);
        gates.push(gate);
        reweighted.push(
            block
                .iter()
                .map(|row| row.iter().map(|v| v * gate).collect())
                .collect(),
        );
    }
    Ok(GateOutput { gates, reweighted })
}

/// Analytic gradient of a camera gate with respect to any single entry of
/// its block: `sigmoid'(mean) / (N_V * C_V)`. Uniform across entries.
pub fn gate_gradient(block: &[Vec<f64>]) -> Result<f64> {
    if block.is_empty() || block[0].is_empty() {
        return Err(FusionError::Empty("gating undefined with zero voxels".to_string()));
    }
    let denom = (block.len() * block[0].len()) as f64;
    let flat: Vec<f64> = block.iter().flatten().copied().collect();
    let mean = pairwise_sum(&flat) / denom;
    Ok(sigmoid_prime(mean) / denom)
}
