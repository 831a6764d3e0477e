use crate::sensorio::Box3D;
use crate::voxelize::SparseVoxelSet;

use super::{DetectError, Result};

/// Sub-voxel centers of a box: `S^3` points laid out in the box's
/// yaw-rotated frame, ordered by `(ix * S + iy) * S + iz`.
fn sub_voxel_centers(b: &Box3D, s: usize) -> Vec<[f64; 3]> {
    let (sin_y, cos_y) = b.yaw.sin_cos();
    let mut centers = Vec::with_capacity(s * s * s);
    for ix in 0..s {
        for iy in 0..s {
            for iz in 0..s {
                let lx = ((ix as f64 + 0.5) / s as f64 - 0.5) * b.l;
                let ly = ((iy as f64 + 0.5) / s as f64 - 0.5) * b.w;
                let lz = ((iz as f64 + 0.5) / s as f64 - 0.5) * b.h;
                centers.push([
                    b.cx + cos_y * lx - sin_y * ly,
                    b.cy + sin_y * lx + cos_y * ly,
                    b.cz + lz,
                ]);
            }
        }
    }
    centers
}

/// ROI grid pooling over free-form point features: each of the `S^3`
/// sub-voxel centers gathers the mean feature of all points within radius
/// `r`; empty neighborhoods yield zero rows. Rows are `(ix * S + iy) * S + iz`
/// ordered, each `feature_dim` wide.
pub fn roi_grid_pool_points(
    b: &Box3D,
    centers: &[[f64; 3]],
    features: &[Vec<f64>],
    s: usize,
    r: f64,
) -> Result<Vec<Vec<f64>>> {
    if centers.len() != features.len() {
        return Err(DetectError::ShapeMismatch(format!(
            "{} centers vs {} features",
            centers.len(),
            features.len()
        )));
    }
    if s == 0 || r <= 0.0 {
        return Err(DetectError::InvalidArgument(
            "grid size must be >= 1 and radius positive".to_string(),
        ));
    }
    let dim = features.first().map_or(0, |f| f.len());
    let r2 = r * r;
    let mut rows = Vec::with_capacity(s * s * s);
    for sub in sub_voxel_centers(b, s) {
        let mut acc = vec![0.0; dim];
        let mut count = 0usize;
        for (p, f) in centers.iter().zip(features) {
            let d2 = (p[0] - sub[0]).powi(2) + (p[1] - sub[1]).powi(2) + (p[2] - sub[2]).powi(2);
            if d2 <= r2 {
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += v;
                }
                count += 1;
            }
        }
        if count > 0 {
            for a in &mut acc {
                *a /= count as f64;
            }
        }
        rows.push(acc);
    }
    Ok(rows)
}

/// ROI grid pooling over the sparse voxel grid: gathers the concatenation
/// `[original | fused]` (width `2 C_V`) of every voxel whose center lies
/// within radius `r` of each sub-voxel center.
///
/// `fused` rows align with `voxels.indices()`.
pub fn roi_grid_pool(
    b: &Box3D,
    voxels: &SparseVoxelSet,
    fused: &[Vec<f64>],
    s: usize,
    r: f64,
) -> Result<Vec<Vec<f64>>> {
    if fused.len() != voxels.len() {
        return Err(DetectError::ShapeMismatch(format!(
            "{} fused rows vs {} voxels",
            fused.len(),
            voxels.len()
        )));
    }
    let c_v = voxels.spec.c_v;
    let mut centers = Vec::with_capacity(voxels.len());
    let mut features = Vec::with_capacity(voxels.len());
    for ((idx, orig), fu) in voxels.entries.iter().zip(fused) {
        if fu.len() != c_v {
            return Err(DetectError::ShapeMismatch(
                "fused feature arity differs from C_V".to_string(),
            ));
        }
        centers.push(voxels.spec.voxel_center(*idx));
        let mut cat = Vec::with_capacity(2 * c_v);
        cat.extend_from_slice(orig);
        cat.extend_from_slice(fu);
        features.push(cat);
    }
    roi_grid_pool_points(b, &centers, &features, s, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorio::ObjectClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mk_box(center: [f64; 3], extents: [f64; 3], yaw: f64) -> Box3D {
        Box3D::new(center, extents, yaw, ObjectClass::Vehicle).unwrap()
    }

    #[test]
    fn uniform_field_gives_identical_rows() {
        let b = mk_box([0.0; 3], [2.0, 2.0, 2.0], 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let centers: Vec<[f64; 3]> = (0..500)
            .map(|_| {
                [
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ]
            })
            .collect();
        let features = vec![vec![0.7, -0.2]; centers.len()];
        // radius large enough that every sub-voxel sees at least one point
        let rows = roi_grid_pool_points(&b, &centers, &features, 3, 5.0).unwrap();
        for row in &rows {
            assert!((row[0] - 0.7).abs() < 1e-12);
            assert!((row[1] - -0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_neighborhoods_are_zero() {
        let b = mk_box([0.0; 3], [1.0, 1.0, 1.0], 0.0);
        let centers = vec![[100.0, 100.0, 100.0]];
        let features = vec![vec![5.0]];
        let rows = roi_grid_pool_points(&b, &centers, &features, 2, 0.5).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_exhaustive_distance_scan_oracle() {
        // Oracle: independent re-computation of sub-voxel centers and a
        // brute-force distance scan per row.
        let b = mk_box([1.0, -2.0, 0.5], [3.0, 1.5, 1.2], 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let centers: Vec<[f64; 3]> = (0..200)
            .map(|_| {
                [
                    rng.gen_range(-2.0..4.0),
                    rng.gen_range(-4.0..0.0),
                    rng.gen_range(-1.0..2.0),
                ]
            })
            .collect();
        let features: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let s = 4;
        let r = 0.6;
        let rows = roi_grid_pool_points(&b, &centers, &features, s, r).unwrap();

        let (sy, cy) = (b.yaw.sin(), b.yaw.cos());
        for ix in 0..s {
            for iy in 0..s {
                for iz in 0..s {
                    let lx = ((ix as f64 + 0.5) / s as f64 - 0.5) * b.l;
                    let ly = ((iy as f64 + 0.5) / s as f64 - 0.5) * b.w;
                    let lz = ((iz as f64 + 0.5) / s as f64 - 0.5) * b.h;
                    let sub = [
                        b.cx + cy * lx - sy * ly,
                        b.cy + sy * lx + cy * ly,
                        b.cz + lz,
                    ];
                    let mut acc = vec![0.0; 2];
                    let mut n = 0;
                    for (p, f) in centers.iter().zip(&features) {
                        let d = ((p[0] - sub[0]).powi(2)
                            + (p[1] - sub[1]).powi(2)
                            + (p[2] - sub[2]).powi(2))
                        .sqrt();
                        if d <= r {
                            acc[0] += f[0];
                            acc[1] += f[1];
                            n += 1;
                        }
                    }
                    if n > 0 {
                        acc[0] /= n as f64;
                        acc[1] /= n as f64;
                    }
                    let row = &rows[(ix * s + iy) * s + iz];
                    assert!((row[0] - acc[0]).abs() < 1e-6);
                    assert!((row[1] - acc[1]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn invariant_under_joint_rigid_transform() {
        use crate::mat::axis_angle;
        use nalgebra::Vector3;
        let b = mk_box([1.0, 0.5, 0.2], [2.5, 1.2, 1.0], 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers: Vec<[f64; 3]> = (0..150)
            .map(|_| {
                [
                    rng.gen_range(-1.0..3.0),
                    rng.gen_range(-1.0..2.0),
                    rng.gen_range(-0.5..1.0),
                ]
            })
            .collect();
        let features: Vec<Vec<f64>> =
            (0..150).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let base = roi_grid_pool_points(&b, &centers, &features, 3, 0.7).unwrap();

        // rotate about z and translate, applied to box and points jointly
        let phi = 0.9;
        let rot = axis_angle(&Vector3::new(0.0, 0.0, 1.0), phi);
        let t = Vector3::new(2.0, -1.0, 0.5);
        let moved_centers: Vec<[f64; 3]> = centers
            .iter()
            .map(|p| {
                let v = rot * Vector3::new(p[0], p[1], p[2]) + t;
                [v.x, v.y, v.z]
            })
            .collect();
        let c = rot * Vector3::new(b.cx, b.cy, b.cz) + t;
        let moved_box = mk_box([c.x, c.y, c.z], [b.l, b.w, b.h], b.yaw + phi);
        let moved = roi_grid_pool_points(&moved_box, &moved_centers, &features, 3, 0.7).unwrap();
        for (ra, rb) in base.iter().zip(&moved) {
            for (a, v) in ra.iter().zip(rb) {
                assert!((a - v).abs() < 1e-6);
            }
        }
    }
}
