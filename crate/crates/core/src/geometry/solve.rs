use nalgebra::{DMatrix, Matrix2x3, Matrix3, Matrix6, Vector3, Vector6};

use crate::mat::{axis_angle, polar_rotation};
use crate::sensorio::PointCloud;

use super::rigid::RigidTransform;
use super::{GeometryError, Result};

/// One 3D-2D correspondence: a point in the source sensor frame and its
/// observed pixel in the camera image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub xyz: [f64; 3],
    pub uv: [f64; 2],
}

/// Solver output: the recovered transform and the final RMS reprojection
/// error in pixels.
#[derive(Debug, Clone)]
pub struct RigidSolution {
    pub transform: RigidTransform,
    pub rms_px: f64,
}

const MIN_CORRESPONDENCES: usize = 6;
const GN_MAX_ITERS: usize = 20;
const GN_STEP_TOL: f64 = 1e-10;
const RANK_RATIO_TOL: f64 = 1e-9;

/// Solve for the rigid transform mapping source-frame points onto camera
/// pixels: DLT on K-normalized coordinates, polar-decomposition
/// orthonormalization, then Gauss-Newton reprojection refinement.
///
/// Needs at least six non-degenerate correspondences; near-coplanar or
/// collinear configurations are flagged as degenerate via the rank of the
/// design matrix.
pub fn solve_rigid(correspondences: &[Correspondence], k: &Matrix3<f64>) -> Result<RigidSolution> {
    let n = correspondences.len();
    if n < MIN_CORRESPONDENCES {
        return Err(GeometryError::TooFewPoints {
            got: n,
            need: MIN_CORRESPONDENCES,
        });
    }
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| GeometryError::Singular("intrinsics".to_string()))?;

    // Hartley-style normalization of the 3D points for conditioning.
    let mut centroid = Vector3::zeros();
    for c in correspondences {
        centroid += Vector3::from_column_slice(&c.xyz);
    }
    centroid /= n as f64;
    let mut mean_dist = 0.0;
    for c in correspondences {
        mean_dist += (Vector3::from_column_slice(&c.xyz) - centroid).norm();
    }
    mean_dist /= n as f64;
    let scale = if mean_dist > 1e-12 {
        3f64.sqrt() / mean_dist
    } else {
        1.0
    };

    // Design matrix for P in normalized image coordinates.
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, c) in correspondences.iter().enumerate() {
        let xp = (Vector3::from_column_slice(&c.xyz) - centroid) * scale;
        let nh = k_inv * Vector3::new(c.uv[0], c.uv[1], 1.0);
        let (xn, yn) = (nh.x / nh.z, nh.y / nh.z);
        let row = 2 * i;
        for (j, v) in [xp.x, xp.y, xp.z, 1.0].iter().enumerate() {
            a[(row, j)] = *v;
            a[(row + 1, 4 + j)] = *v;
            a[(row, 8 + j)] = -xn * v;
            a[(row + 1, 8 + j)] = -yn * v;
        }
    }

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    // Rank check: a unique solution leaves exactly one near-zero singular
    // value; a second one means coplanar/collinear geometry.
    if sv[10] / sv[0] < RANK_RATIO_TOL {
        return Err(GeometryError::Degenerate(format!(
            "design matrix rank deficient: sigma11/sigma1 = {:.3e}",
            sv[10] / sv[0]
        )));
    }
    let v_t = svd.v_t.ok_or_else(|| {
        GeometryError::Degenerate("svd failed on design matrix".to_string())
    })?;
    let p_vec = v_t.row(11);
    let mut p = DMatrix::<f64>::zeros(3, 4);
    for r in 0..3 {
        for c in 0..4 {
            p[(r, c)] = p_vec[4 * r + c];
        }
    }

    // Undo 3D normalization: P_unnorm = [M*s | p4 - M*s*centroid].
    let m_scaled = p.view((0, 0), (3, 3)).clone_owned() * scale;
    let p4 = p.column(3).clone_owned() - &m_scaled * centroid;

    // Fix the projective sign so points land in front of the camera.
    let mut front = 0i64;
    for c in correspondences {
        let x = Vector3::from_column_slice(&c.xyz);
        let depth = m_scaled.row(2).transpose().dot(&x) + p4[2];
        front += if depth > 0.0 { 1 } else { -1 };
    }
    let sign = if front >= 0 { 1.0 } else { -1.0 };
    let m_signed = Matrix3::from_iterator(m_scaled.iter().map(|v| v * sign));
    let p4 = Vector3::new(p4[0] * sign, p4[1] * sign, p4[2] * sign);

    let m_svd = m_signed.svd(false, false);
    let sigma_mean = m_svd.singular_values.iter().sum::<f64>() / 3.0;
    if sigma_mean < 1e-15 {
        return Err(GeometryError::Degenerate(
            "vanishing rotation block".to_string(),
        ));
    }
    let mut rotation = polar_rotation(&m_signed);
    let mut translation = p4 / sigma_mean;

    // Gauss-Newton on (rotation, translation) minimizing pixel reprojection.
    for _ in 0..GN_MAX_ITERS {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for c in correspondences {
            let x = Vector3::from_column_slice(&c.xyz);
            let pc = rotation * x + translation;
            let h = k * pc;
            let hz = if h.z.abs() < 1e-9 {
                1e-9f64.copysign(h.z)
            } else {
                h.z
            };
            let pred_u = h.x / hz;
            let pred_v = h.y / hz;
            let res = nalgebra::Vector2::new(pred_u - c.uv[0], pred_v - c.uv[1]);

            let d_proj = Matrix2x3::new(
                1.0 / hz,
                0.0,
                -h.x / (hz * hz),
                0.0,
                1.0 / hz,
                -h.y / (hz * hz),
            ) * k;
            let rx = rotation * x;
            let neg_skew = Matrix3::new(
                0.0, rx.z, -rx.y, //
                -rx.z, 0.0, rx.x, //
                rx.y, -rx.x, 0.0,
            );
            let mut jac = nalgebra::Matrix2x6::<f64>::zeros();
            jac.view_mut((0, 0), (2, 3)).copy_from(&(d_proj * neg_skew));
            jac.view_mut((0, 3), (2, 3)).copy_from(&d_proj);

            jtj += jac.transpose() * jac;
            jtr += jac.transpose() * res;
        }
        let delta = match jtj.lu().solve(&(-jtr)) {
            Some(d) => d,
            None => break,
        };
        let dw = Vector3::new(delta[0], delta[1], delta[2]);
        let dt = Vector3::new(delta[3], delta[4], delta[5]);
        let angle = dw.norm();
        if angle > 0.0 {
            rotation = polar_rotation(&(axis_angle(&dw, angle) * rotation));
        }
        translation += dt;
        if delta.norm() < GN_STEP_TOL {
            break;
        }
    }

    let rms = reprojection_rms(correspondences, k, &rotation, &translation);
    Ok(RigidSolution {
        transform: RigidTransform::new(rotation, translation)?,
        rms_px: rms,
    })
}

/// Root-mean-square pixel reprojection error of a pose over correspondences.
pub fn reprojection_rms(
    correspondences: &[Correspondence],
    k: &Matrix3<f64>,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> f64 {
    let mut acc = 0.0;
    for c in correspondences {
        let pc = rotation * Vector3::from_column_slice(&c.xyz) + translation;
        let h = k * pc;
        let du = h.x / h.z - c.uv[0];
        let dv = h.y / h.z - c.uv[1];
        acc += du * du + dv * dv;
    }
    (acc / correspondences.len() as f64).sqrt()
}

/// Index of the radar point with the highest return power (feature 0).
/// Ties break toward the lowest index.
pub fn select_reflector(cloud: &PointCloud) -> Result<usize> {
    if cloud.is_empty() {
        return Err(GeometryError::Empty("radar cloud".to_string()));
    }
    let mut best = 0usize;
    let mut best_power = f64::NEG_INFINITY;
    for (i, f) in cloud.features.iter().enumerate() {
        let power = f64::from(*f.first().ok_or_else(|| {
            GeometryError::InvalidArgument("point without power feature".to_string())
        })?);
        if power > best_power {
            best_power = power;
            best = i;
        }
    }
    Ok(best)
}

/// Maximum row disparity `|v_left - v_right|` over rectified stereo pairs.
/// The caller compares the result to its scanline tolerance.
pub fn epipolar_row_check(pairs: &[([f64; 2], [f64; 2])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(GeometryError::Empty("correspondence pairs".to_string()));
    }
    Ok(pairs
        .iter()
        .map(|(l, r)| (l[1] - r[1]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::rotation_angle_between;
    use crate::sensorio::Sensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_k() -> Matrix3<f64> {
        Matrix3::new(400.0, 0.0, 320.0, 0.0, 420.0, 240.0, 0.0, 0.0, 1.0)
    }

    fn ground_truth_pose() -> (Matrix3<f64>, Vector3<f64>) {
        (
            axis_angle(&Vector3::new(0.1, 0.9, -0.3), 0.4),
            Vector3::new(0.3, -0.2, 0.8),
        )
    }

    fn project_exact(
        k: &Matrix3<f64>,
        r: &Matrix3<f64>,
        t: &Vector3<f64>,
        x: &Vector3<f64>,
    ) -> [f64; 2] {
        let h = k * (r * x + t);
        [h.x / h.z, h.y / h.z]
    }

    fn synthetic_correspondences(
        count: usize,
        seed: u64,
        noise_px: f64,
    ) -> Vec<Correspondence> {
        let (r, t) = ground_truth_pose();
        let k = test_k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = Vector3::new(
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(6.0..25.0),
                );
                let mut uv = project_exact(&k, &r, &t, &x);
                if noise_px > 0.0 {
                    uv[0] += rng.gen_range(-1.0..1.0) * noise_px;
                    uv[1] += rng.gen_range(-1.0..1.0) * noise_px;
                }
                Correspondence {
                    xyz: [x.x, x.y, x.z],
                    uv,
                }
            })
            .collect()
    }

    #[test]
    fn recovers_noise_free_pose_exactly() {
        // Oracle: forward-project through a known pose, then invert.
        let (r_gt, t_gt) = ground_truth_pose();
        let sol = solve_rigid(&synthetic_correspondences(8, 3, 0.0), &test_k()).unwrap();
        let angle = rotation_angle_between(&sol.transform.rotation, &r_gt);
        assert!(angle < 1e-6, "rotation error {angle}");
        assert!((sol.transform.translation - t_gt).norm() < 1e-6);
        assert!(sol.rms_px < 1e-6);
    }

    #[test]
    fn five_points_is_too_few() {
        assert!(matches!(
            solve_rigid(&synthetic_correspondences(5, 3, 0.0), &test_k()),
            Err(GeometryError::TooFewPoints { got: 5, need: 6 })
        ));
    }

    #[test]
    fn coplanar_points_flagged_degenerate() {
        // Oracle: rank of the DLT design matrix drops for coplanar geometry.
        let (r, t) = ground_truth_pose();
        let k = test_k();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let corr: Vec<Correspondence> = (0..8)
            .map(|_| {
                let x = Vector3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0), 10.0);
                Correspondence {
                    xyz: [x.x, x.y, x.z],
                    uv: project_exact(&k, &r, &t, &x),
                }
            })
            .collect();
        assert!(matches!(
            solve_rigid(&corr, &k),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn rms_grows_with_injected_noise() {
        // Statistical: mean RMS over seeds must be non-decreasing in noise.
        let sigmas = [0.0, 0.5, 1.0, 2.0];
        let mut means = Vec::new();
        for &sigma in &sigmas {
            let mut acc = 0.0;
            for seed in 0..20 {
                let corr = synthetic_correspondences(24, 100 + seed, sigma);
                acc += solve_rigid(&corr, &test_k()).unwrap().rms_px;
            }
            means.push(acc / 20.0);
        }
        for w in means.windows(2) {
            assert!(w[0] <= w[1] + 1e-9, "rms not monotone: {means:?}");
        }
    }

    #[test]
    fn reflector_selection_rules() {
        let cloud = PointCloud::new(
            Sensor::Radar4d,
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![vec![1.0, 0.0], vec![5.0, 0.0], vec![2.0, 0.0]],
        )
        .unwrap();
        assert_eq!(select_reflector(&cloud).unwrap(), 1);

        let tie = PointCloud::new(
            Sensor::Radar4d,
            vec![[0.0; 3], [1.0, 0.0, 0.0]],
            vec![vec![3.0, 0.0], vec![3.0, 0.0]],
        )
        .unwrap();
        assert_eq!(select_reflector(&tie).unwrap(), 0);

        assert!(matches!(
            select_reflector(&PointCloud::empty(Sensor::Radar4d)),
            Err(GeometryError::Empty(_))
        ));
    }

    #[test]
    fn row_check_reports_max_disparity() {
        let pairs = vec![
            ([10.0, 5.0], [3.0, 5.0]),
            ([20.0, 9.0], [12.0, 7.0]),
            ([1.0, 2.0], [0.0, 2.0]),
        ];
        assert_eq!(epipolar_row_check(&pairs).unwrap(), 2.0);
        assert_eq!(
            epipolar_row_check(&[([0.0, 4.0], [1.0, 4.0])]).unwrap(),
            0.0
        );
        assert!(matches!(
            epipolar_row_check(&[]),
            Err(GeometryError::Empty(_))
        ));
    }
}
