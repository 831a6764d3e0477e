use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};

use crate::mat::orthonormal_drift;
use crate::sensorio::ImageModality;

use super::{GeometryError, Result};

/// Minimum homogeneous depth accepted by the projector.
pub const MIN_DEPTH: f64 = 1e-6;

/// Ideal pinhole camera: intrinsics plus extrinsic pose
/// (rig reference frame -> camera frame).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub modality: ImageModality,
    /// Upper-triangular intrinsics with positive focal lengths.
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// Image resolution (width, height) in pixels.
    pub resolution: (u32, u32),
}

impl CameraModel {
    pub fn new(
        modality: ImageModality,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        resolution: (u32, u32),
    ) -> Result<Self> {
        validate_intrinsics(&intrinsics)?;
        if orthonormal_drift(&rotation) > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation(
                "extrinsic rotation must be orthonormal with det +1".to_string(),
            ));
        }
        Ok(CameraModel {
            modality,
            intrinsics,
            rotation,
            translation,
            resolution,
        })
    }

    /// Simple pinhole with focal `f`, principal point at the given center,
    /// identity pose.
    pub fn simple(
        modality: ImageModality,
        f: f64,
        center: (f64, f64),
        resolution: (u32, u32),
    ) -> Result<Self> {
        let k = Matrix3::new(f, 0.0, center.0, 0.0, f, center.1, 0.0, 0.0, 1.0);
        CameraModel::new(
            modality,
            k,
            Matrix3::identity(),
            Vector3::zeros(),
            resolution,
        )
    }
}

fn validate_intrinsics(k: &Matrix3<f64>) -> Result<()> {
    if !k.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::InvalidIntrinsics(
            "non-finite entries".to_string(),
        ));
    }
    if k[(1, 0)].abs() > 1e-12 || k[(2, 0)].abs() > 1e-12 || k[(2, 1)].abs() > 1e-12 {
        return Err(GeometryError::InvalidIntrinsics(
            "K must be upper-triangular".to_string(),
        ));
    }
    if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 {
        return Err(GeometryError::InvalidIntrinsics(
            "focal lengths must be positive".to_string(),
        ));
    }
    if k.determinant().abs() < 1e-12 {
        return Err(GeometryError::InvalidIntrinsics("singular K".to_string()));
    }
    Ok(())
}

/// 3x4 projection matrix `M = K [R | t]`.
pub fn projection_matrix(cam: &CameraModel) -> Matrix3x4<f64> {
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&cam.rotation);
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&cam.translation);
    cam.intrinsics * rt
}

/// Result of projecting a 3D point: pixel coordinates plus camera-frame depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Perspective projection of a world point through `M`.
///
/// The homogeneous depth must exceed [`MIN_DEPTH`]; points at or behind the
/// camera plane are an error.
pub fn project_point(m: &Matrix3x4<f64>, p: &Vector3<f64>) -> Result<Projection> {
    let h = m * Vector4::new(p.x, p.y, p.z, 1.0);
    if h.z <= MIN_DEPTH {
        return Err(GeometryError::BehindCamera(h.z));
    }
    Ok(Projection {
        u: h.x / h.z,
        v: h.y / h.z,
        depth: h.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_cam() -> CameraModel {
        CameraModel::simple(ImageModality::Rgb, 100.0, (320.0, 240.0), (640, 480)).unwrap()
    }

    #[test]
    fn identity_camera_projection_matrix() {
        let cam = CameraModel::new(
            ImageModality::Rgb,
            Matrix3::identity(),
            Matrix3::identity(),
            Vector3::zeros(),
            (64, 64),
        )
        .unwrap();
        let m = projection_matrix(&cam);
        assert_eq!(m.fixed_view::<3, 3>(0, 0).clone_owned(), Matrix3::identity());
        assert_eq!(m.column(3).clone_owned(), Vector3::zeros());
    }

    #[test]
    fn translation_appears_in_last_column() {
        let cam = CameraModel::new(
            ImageModality::Rgb,
            Matrix3::identity(),
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, 1.0),
            (64, 64),
        )
        .unwrap();
        let m = projection_matrix(&cam);
        assert_eq!(m.column(3).clone_owned(), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn principal_point_projection() {
        let m = projection_matrix(&simple_cam());
        let p = project_point(&m, &Vector3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 5.0));
    }

    #[test]
    fn pinhole_formula_by_hand() {
        // u = cx + fx * x / z = 320 + 100 * 1 / 5 = 340
        let m = projection_matrix(&simple_cam());
        let p = project_point(&m, &Vector3::new(1.0, 0.0, 5.0)).unwrap();
        assert!((p.u - 340.0).abs() < 1e-12);
        assert!((p.v - 240.0).abs() < 1e-12);
        assert!((p.depth - 5.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let m = projection_matrix(&simple_cam());
        assert!(matches!(
            project_point(&m, &Vector3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn matrix_projection_agrees_with_two_step_oracle() {
        // Oracle: compute K(Rp + t) explicitly and divide.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = Matrix3::new(
                rng.gen_range(50.0..500.0),
                0.0,
                rng.gen_range(100.0..400.0),
                0.0,
                rng.gen_range(50.0..500.0),
                rng.gen_range(100.0..400.0),
                0.0,
                0.0,
                1.0,
            );
            let axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            );
            let r = crate::mat::axis_angle(&axis, rng.gen_range(-0.4..0.4));
            let t = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let cam = CameraModel::new(ImageModality::Thermal, k, r, t, (640, 480)).unwrap();
            let m = projection_matrix(&cam);
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(4.0..30.0),
            );
            let cam_p = r * p + t;
            if cam_p.z <= MIN_DEPTH {
                continue;
            }
            let h = k * cam_p;
            let proj = project_point(&m, &p).unwrap();
            assert!((proj.u - h.x / h.z).abs() < 1e-9);
            assert!((proj.v - h.y / h.z).abs() < 1e-9);
            assert!((proj.depth - cam_p.z).abs() < 1e-9);
        }
    }

    #[test]
    fn intrinsics_validation() {
        let singular = Matrix3::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(
            ImageModality::Rgb,
            singular,
            Matrix3::identity(),
            Vector3::zeros(),
            (64, 64)
        )
        .is_err());
    }
}
