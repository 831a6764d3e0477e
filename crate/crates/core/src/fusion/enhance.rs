use crate::geometry::{project_point, projection_matrix, CameraModel};
use crate::nn::{bilinear_sample, softmax};
use crate::voxelize::SparseVoxelSet;

use nalgebra::Vector3;

use super::backbone::ImageFeatureMap;
use super::{BranchWeights, FusionError, Result};

/// How the sampled image features enter the cross-attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionMode {
    /// The Q sampled features act as keys/values (deformable-attention
    /// convention). Default.
    DeformableKv,
    /// The Eq.-style aggregate acts as the single key/value; attention is
    /// weight-degenerate in this mode and kept for comparison.
    LiteralSingleKv,
}

/// Configuration for the enhancement pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceParams {
    pub mode: AttentionMode,
    /// Softmax-normalize the predicted sampling weights (on by default);
    /// when off, raw logits are used as weights.
    pub normalize_weights: bool,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        EnhanceParams {
            mode: AttentionMode::DeformableKv,
            normalize_weights: true,
        }
    }
}

/// Output of the deformable sampling stage for one voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFeatures {
    /// Q bilinear samples, each `C_I` wide.
    pub samples: Vec<Vec<f64>>,
    /// Q aggregation weights (softmaxed unless disabled).
    pub weights: Vec<f64>,
    /// Weighted aggregate: `sum_q w_q * sample_q`.
    pub aggregate: Vec<f64>,
}

/// Sample the feature map at `base + offset_q` for each sampling point and
/// aggregate with the provided weights.
pub fn deformable_aggregate(
    featmap: &ImageFeatureMap,
    base: (f64, f64),
    offsets: &[(f64, f64)],
    weights: &[f64],
) -> Result<SampledFeatures> {
    if offsets.len() != weights.len() {
        return Err(FusionError::ShapeMismatch(format!(
            "{} offsets vs {} weights",
            offsets.len(),
            weights.len()
        )));
    }
    let c = featmap.channels;
    let mut samples = Vec::with_capacity(offsets.len());
    let mut aggregate = vec![0.0; c];
    for ((du, dv), w) in offsets.iter().zip(weights) {
        let s = bilinear_sample(
            &featmap.data,
            featmap.height,
            featmap.width,
            c,
            base.0 + du,
            base.1 + dv,
        );
        for (a, v) in aggregate.iter_mut().zip(&s) {
            *a += w * v;
        }
        samples.push(s);
    }
    Ok(SampledFeatures {
        samples,
        weights: weights.to_vec(),
        aggregate,
    })
}

/// Single-head scaled-dot-product attention over a small key/value list.
/// Returns the attended output and the attention weights.
pub fn attention(query: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(keys.len(), values.len());
    assert!(!keys.is_empty());
    let d = query.len() as f64;
    let scale = 1.0 / d.sqrt();
    let logits: Vec<f64> = keys
        .iter()
        .map(|k| k.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() * scale)
        .collect();
    let alpha = softmax(&logits);
    let dv = values[0].len();
    let mut out = vec![0.0; dv];
    for (a, v) in alpha.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += a * x;
        }
    }
    (out, alpha)
}

/// Analytic Jacobian of the attention output with respect to the query:
/// `J = (1/sqrt(d)) * sum_q alpha_q * v_q (k_q - k_bar)^T` with
/// `k_bar = sum_r alpha_r k_r`. Row-major `dv x dk`.
pub fn attention_query_jacobian(
    query: &[f64],
    keys: &[Vec<f64>],
    values: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let (_, alpha) = attention(query, keys, values);
    let dk = query.len();
    let dv = values[0].len();
    let scale = 1.0 / (dk as f64).sqrt();
    let mut k_bar = vec![0.0; dk];
    for (a, k) in alpha.iter().zip(keys) {
        for (kb, kv) in k_bar.iter_mut().zip(k) {
            *kb += a * kv;
        }
    }
    let mut jac = vec![vec![0.0; dk]; dv];
    for ((a, k), v) in alpha.iter().zip(keys).zip(values) {
        for (r, vr) in v.iter().enumerate() {
            for (c, kc) in k.iter().enumerate() {
                jac[r][c] += scale * a * vr * (kc - k_bar[c]);
            }
        }
    }
    jac
}

/// Image-enhance every voxel feature against one camera branch.
///
/// Per voxel: project the center into the feature map, predict Q offsets
/// and weights from the voxel feature, bilinear-sample, aggregate, attend
/// (query = projected voxel feature), project back and add residually.
/// Voxels behind the camera or outside the map pass through unchanged.
/// Output rows align with `voxels.indices()`.
pub fn enhance_voxels(
    voxels: &SparseVoxelSet,
    featmap: &ImageFeatureMap,
    cam: &CameraModel,
    branch: &BranchWeights,
    params: &EnhanceParams,
) -> Result<Vec<Vec<f64>>> {
    let c_v = voxels.spec.c_v;
    branch.validate(c_v, featmap.channels)?;
    if branch.samples == 0 {
        return Err(FusionError::InvalidWeights(
            "sample count Q must be positive".to_string(),
        ));
    }
    let m = projection_matrix(cam);
    let (sx, sy) = featmap.pixel_scale();
    let q_count = branch.samples;

    let mut enhanced = Vec::with_capacity(voxels.len());
    for (idx, f_v) in &voxels.entries {
        let center = voxels.spec.voxel_center(*idx);
        let proj = match project_point(&m, &Vector3::new(center[0], center[1], center[2])) {
            Ok(p) => p,
            Err(_) => {
                enhanced.push(f_v.clone());
                continue;
            }
        };
        let base = (proj.u * sx, proj.v * sy);

        let pred = branch.offset_predictor.forward(f_v)?;
        let mut offsets = Vec::with_capacity(q_count);
        let mut logits = Vec::with_capacity(q_count);
        for q in 0..q_count {
            offsets.push((pred[3 * q], pred[3 * q + 1]));
            logits.push(pred[3 * q + 2]);
        }
        let weights = if params.normalize_weights {
            softmax(&logits)
        } else {
            logits
        };
        let sampled = deformable_aggregate(featmap, base, &offsets, &weights)?;

        let contribution = match params.mode {
            AttentionMode::DeformableKv => {
                let query = branch.w_query.forward(f_v)?;
                let keys: Vec<Vec<f64>> = sampled
                    .samples
                    .iter()
                    .map(|s| branch.w_key.forward(s))
                    .collect::<crate::nn::Result<_>>()?;
                let values: Vec<Vec<f64>> = sampled
                    .samples
                    .iter()
                    .map(|s| branch.w_value.forward(s))
                    .collect::<crate::nn::Result<_>>()?;
                let (attn_out, _) = attention(&query, &keys, &values);
                branch.w_out.forward(&attn_out)?
            }
            AttentionMode::LiteralSingleKv => {
                // Single key/value degenerates the softmax to 1.
                let value = branch.w_value.forward(&sampled.aggregate)?;
                branch.w_out.forward(&value)?
            }
        };

        let out: Vec<f64> = f_v.iter().zip(&contribution).map(|(a, b)| a + b).collect();
        enhanced.push(out);
    }
    Ok(enhanced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorio::{ImageModality, RangeBox};
    use crate::voxelize::VoxelGridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn featmap_from(data: Vec<f64>, h: usize, w: usize, c: usize) -> ImageFeatureMap {
        ImageFeatureMap {
            modality: ImageModality::Rgb,
            height: h,
            width: w,
            channels: c,
            data,
            source_resolution: (w as u32, h as u32),
        }
    }

    /// Independent bilinear oracle with a different formulation.
    fn bilinear_oracle(fm: &ImageFeatureMap, x: f64, y: f64, c: usize) -> f64 {
        let (x0, y0) = (x.floor() as i64, y.floor() as i64);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let fetch = |xx: i64, yy: i64| -> f64 {
            if xx < 0 || yy < 0 || xx >= fm.width as i64 || yy >= fm.height as i64 {
                0.0
            } else {
                fm.data[((yy as usize) * fm.width + xx as usize) * fm.channels + c]
            }
        };
        fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + fetch(x0 + 1, y0) * fx * (1.0 - fy)
            + fetch(x0, y0 + 1) * (1.0 - fx) * fy
            + fetch(x0 + 1, y0 + 1) * fx * fy
    }

    #[test]
    fn zero_offsets_uniform_weights_equal_bilinear_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (h, w, c) = (8, 10, 3);
        let data: Vec<f64> = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fm = featmap_from(data, h, w, c);
        for _ in 0..50 {
            let x = rng.gen_range(-1.0..w as f64);
            let y = rng.gen_range(-1.0..h as f64);
            let q = 4;
            let out = deformable_aggregate(
                &fm,
                (x, y),
                &vec![(0.0, 0.0); q],
                &vec![1.0 / q as f64; q],
            )
            .unwrap();
            for ch in 0..c {
                let want = bilinear_oracle(&fm, x, y, ch);
                assert!(
                    (out.aggregate[ch] - want).abs() < 1e-6,
                    "({x:.2},{y:.2}) ch {ch}"
                );
            }
        }
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = 5;
            let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let keys: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let (_, alpha) = attention(&q, &keys, &keys);
            assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(alpha.iter().all(|a| *a > 0.0));
        }
    }

    #[test]
    fn attention_jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (dk, dv, nk) = (4, 3, 5);
        for _ in 0..20 {
            let q: Vec<f64> = (0..dk).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let keys: Vec<Vec<f64>> = (0..nk)
                .map(|_| (0..dk).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let values: Vec<Vec<f64>> = (0..nk)
                .map(|_| (0..dv).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let jac = attention_query_jacobian(&q, &keys, &values);
            let step = 1e-4;
            let mut max_rel: f64 = 0.0;
            let mut max_abs: f64 = 0.0;
            for c in 0..dk {
                let mut qp = q.clone();
                qp[c] += step;
                let mut qm = q.clone();
                qm[c] -= step;
                let (op, _) = attention(&qp, &keys, &values);
                let (om, _) = attention(&qm, &keys, &values);
                for r in 0..dv {
                    let fd = (op[r] - om[r]) / (2.0 * step);
                    max_abs = max_abs.max(jac[r][c].abs());
                    max_rel = max_rel.max((fd - jac[r][c]).abs());
                }
            }
            assert!(
                max_rel <= 1e-5 * max_abs.max(1.0),
                "fd mismatch {max_rel}, scale {max_abs}"
            );
        }
    }

    fn small_voxels() -> SparseVoxelSet {
        let range = RangeBox::new([0.0, -2.0, -2.0], [8.0, 2.0, 2.0]).unwrap();
        let spec = VoxelGridSpec::new(range, [1.0; 3], 1, 4, 4).unwrap();
        let mut set = SparseVoxelSet::empty(spec);
        set.insert((4, 1, 2), vec![0.3, -0.2, 0.5, 1.0]).unwrap();
        set.insert((6, 3, 1), vec![-1.0, 0.0, 0.25, 0.1]).unwrap();
        set
    }

    fn forward_camera() -> CameraModel {
        // Optical axis along +x of the grid frame.
        let r = nalgebra::Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        CameraModel::new(
            ImageModality::Rgb,
            nalgebra::Matrix3::new(20.0, 0.0, 16.0, 0.0, 20.0, 12.0, 0.0, 0.0, 1.0),
            r,
            nalgebra::Vector3::zeros(),
            (32, 24),
        )
        .unwrap()
    }

    #[test]
    fn zero_branch_is_pure_residual() {
        let voxels = small_voxels();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fm = featmap_from(
            (0..6 * 8 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            6,
            8,
            2,
        );
        let branch = BranchWeights::zeros(4, 2, 4, 4);
        let out = enhance_voxels(
            &voxels,
            &fm,
            &forward_camera(),
            &branch,
            &EnhanceParams::default(),
        )
        .unwrap();
        let expected: Vec<Vec<f64>> = voxels.entries.values().cloned().collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn q1_degenerates_to_single_sample() {
        let fm = featmap_from(vec![1.0, 2.0, 3.0, 4.0], 2, 2, 1);
        let out =
            deformable_aggregate(&fm, (0.5, 0.5), &[(0.0, 0.0)], &[1.0]).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert!((out.aggregate[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_voxels_pass_through() {
        let range = RangeBox::new([-8.0, -2.0, -2.0], [0.0, 2.0, 2.0]).unwrap();
        let spec = VoxelGridSpec::new(range, [1.0; 3], 1, 4, 4).unwrap();
        let mut set = SparseVoxelSet::empty(spec);
        // behind the +x-looking camera
        set.insert((1, 1, 1), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let fm = featmap_from(vec![1.0; 6 * 8 * 2], 6, 8, 2);
        let branch = BranchWeights::seeded(4, 2, 4, 4, 9);
        let out = enhance_voxels(
            &set,
            &fm,
            &forward_camera(),
            &branch,
            &EnhanceParams::default(),
        )
        .unwrap();
        assert_eq!(out[0], vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn out_of_view_voxels_get_zero_contribution_with_zero_value_bias() {
        // A voxel projecting far outside the feature map samples only
        // zero padding; with zero value/output biases the residual is exact.
        let voxels = small_voxels();
        let fm = featmap_from(vec![0.5; 6 * 8 * 2], 6, 8, 2);
        let mut branch = BranchWeights::seeded(4, 2, 4, 4, 10);
        // huge predicted offsets push all samples outside the map
        branch.offset_predictor = crate::nn::Linear::zeros(12, 4);
        for q in 0..4 {
            branch.offset_predictor.bias[3 * q] = 1e6;
        }
        let out = enhance_voxels(
            &voxels,
            &fm,
            &forward_camera(),
            &branch,
            &EnhanceParams::default(),
        )
        .unwrap();
        let expected: Vec<Vec<f64>> = voxels.entries.values().cloned().collect();
        for (o, e) in out.iter().zip(&expected) {
            for (a, b) in o.iter().zip(e) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn literal_mode_uses_aggregate_as_value() {
        let voxels = small_voxels();
        let fm = featmap_from(vec![0.25; 6 * 8 * 2], 6, 8, 2);
        let branch = BranchWeights::seeded(4, 2, 4, 4, 33);
        let params = EnhanceParams {
            mode: AttentionMode::LiteralSingleKv,
            normalize_weights: true,
        };
        let out = enhance_voxels(&voxels, &fm, &forward_camera(), &branch, &params).unwrap();
        // oracle: recompute by hand for the first voxel
        let (idx, f_v) = voxels.entries.iter().next().unwrap();
        let center = voxels.spec.voxel_center(*idx);
        let m = projection_matrix(&forward_camera());
        let proj =
            project_point(&m, &nalgebra::Vector3::new(center[0], center[1], center[2])).unwrap();
        let (sx, sy) = fm.pixel_scale();
        let pred = branch.offset_predictor.forward(f_v).unwrap();
        let offsets: Vec<(f64, f64)> = (0..4).map(|q| (pred[3 * q], pred[3 * q + 1])).collect();
        let logits: Vec<f64> = (0..4).map(|q| pred[3 * q + 2]).collect();
        let w = softmax(&logits);
        let agg = deformable_aggregate(&fm, (proj.u * sx, proj.v * sy), &offsets, &w)
            .unwrap()
            .aggregate;
        let want: Vec<f64> = f_v
            .iter()
            .zip(
                branch
                    .w_out
                    .forward(&branch.w_value.forward(&agg).unwrap())
                    .unwrap(),
            )
            .map(|(a, b)| a + b)
            .collect();
        for (got, exp) in out[0].iter().zip(&want) {
            assert!((got - exp).abs() < 1e-12);
        }
    }
}
