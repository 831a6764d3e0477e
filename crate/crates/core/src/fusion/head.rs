use serde::{Deserialize, Serialize};

use crate::nn::Mlp;

use super::{FusionError, Result};

/// Two-layer feed-forward fusion head mapping the concatenation of K gated
/// camera blocks plus the original voxel features back to `C_V` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnWeights {
    pub mlp: Mlp,
    pub cameras: usize,
    pub c_v: usize,
}

impl FfnWeights {
    pub fn seeded(c_v: usize, cameras: usize, seed: u64) -> Self {
        let in_dim = (cameras + 1) * c_v;
        FfnWeights {
            mlp: Mlp::seeded(c_v, 2 * c_v, in_dim, seed),
            cameras,
            c_v,
        }
    }

    pub fn zeros(c_v: usize, cameras: usize) -> Self {
        FfnWeights {
            mlp: Mlp::zeros(c_v, 2 * c_v, (cameras + 1) * c_v),
            cameras,
            c_v,
        }
    }

    /// Selects the original voxel feature block exactly (identity on the
    /// trailing `C_V` input columns), valid for inputs of any sign.
    pub fn passthrough_original(c_v: usize, cameras: usize) -> Self {
        FfnWeights {
            mlp: Mlp::passthrough(c_v, (cameras + 1) * c_v, cameras * c_v),
            cameras,
            c_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        if self.mlp.hidden.in_dim != (self.cameras + 1) * self.c_v
            || self.mlp.output.out_dim != self.c_v
        {
            return Err(FusionError::ShapeMismatch(format!(
                "ffn must map {}*C_V -> C_V",
                self.cameras + 1
            )));
        }
        Ok(())
    }
}

/// Final fusion: per voxel, concatenate the K gated camera features with the
/// original voxel feature and apply the FFN, yielding the fused features.
///
/// `gated[m][j]` is camera m's reweighted feature of voxel j; `original[j]`
/// the pre-enhancement voxel feature. Rows stay aligned with the sparse
/// voxel index order.
pub fn fuse_final(
    gated: &[Vec<Vec<f64>>],
    original: &[Vec<f64>],
    ffn: &FfnWeights,
) -> Result<Vec<Vec<f64>>> {
    ffn.validate()?;
    if gated.len() != ffn.cameras {
        return Err(FusionError::ShapeMismatch(format!(
            "expected {} camera blocks, got {}",
            ffn.cameras,
            gated.len()
        )));
    }
    let n_v = original.len();
    for block in gated {
        if block.len() != n_v {
            return Err(FusionError::ShapeMismatch(
                "camera block row count differs from voxel count".to_string(),
            ));
        }
    }
    let mut fused = Vec::with_capacity(n_v);
    for j in 0..n_v {
        let mut cat = Vec::with_capacity((ffn.cameras + 1) * ffn.c_v);
        for block in gated {
            if block[j].len() != ffn.c_v {
                return Err(FusionError::ShapeMismatch(
                    "camera feature arity differs from C_V".to_string(),
                ));
            }
            cat.extend_from_slice(&block[j]);
        }
        if original[j].len() != ffn.c_v {
            return Err(FusionError::ShapeMismatch(
                "original feature arity differs from C_V".to_string(),
            ));
        }
        cat.extend_from_slice(&original[j]);
        fused.push(ffn.mlp.forward(&cat)?);
    }
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn passthrough_head_returns_original_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let original = random_rows(&mut rng, 5, 3);
        let gated = vec![random_rows(&mut rng, 5, 3); 3];
        let ffn = FfnWeights::passthrough_original(3, 3);
        let fused = fuse_final(&gated, &original, &ffn).unwrap();
        assert_eq!(fused, original);
    }

    #[test]
    fn zero_head_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let original = random_rows(&mut rng, 4, 2);
        let gated = vec![random_rows(&mut rng, 4, 2); 2];
        let ffn = FfnWeights::zeros(2, 2);
        let fused = fuse_final(&gated, &original, &ffn).unwrap();
        assert!(fused.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_naive_matmul_oracle() {
        // Oracle: explicit matrix multiply with relu, written independently.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, c, k) = (6, 3, 3);
        let original = random_rows(&mut rng, n, c);
        let gated: Vec<Vec<Vec<f64>>> =
            (0..k).map(|_| random_rows(&mut rng, n, c)).collect();
        let ffn = FfnWeights::seeded(c, k, 99);
        let fused = fuse_final(&gated, &original, &ffn).unwrap();

        for j in 0..n {
            let mut x = Vec::new();
            for block in &gated {
                x.extend_from_slice(&block[j]);
            }
            x.extend_from_slice(&original[j]);
            let hid = &ffn.mlp.hidden;
            let mut h = vec![0.0; hid.out_dim];
            for (o, hv) in h.iter_mut().enumerate() {
                let mut acc = hid.bias[o];
                for (i, xv) in x.iter().enumerate() {
                    acc += hid.weight[o * hid.in_dim + i] * xv;
                }
                *hv = acc.max(0.0);
            }
            let out_l = &ffn.mlp.output;
            for o in 0..out_l.out_dim {
                let mut acc = out_l.bias[o];
                for (i, hv) in h.iter().enumerate() {
                    acc += out_l.weight[o * out_l.in_dim + i] * hv;
                }
                assert!((fused[j][o] - acc).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn camera_count_mismatch_is_an_error() {
        let original = vec![vec![0.0; 2]; 3];
        let gated = vec![vec![vec![0.0; 2]; 3]; 2];
        let ffn = FfnWeights::zeros(2, 3);
        assert!(matches!(
            fuse_final(&gated, &original, &ffn),
            Err(FusionError::ShapeMismatch(_))
        ));
    }
}
