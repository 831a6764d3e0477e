use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mat::{axis_angle, orthonormal_drift};

use super::{GeometryError, Result};

/// Rigid transform `[R | t]` between two sensor frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if orthonormal_drift(&rotation) > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation(
                "R must be orthonormal with det +1".to_string(),
            ));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0f64),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Perturb an extrinsic transform by an exact translation magnitude and an
/// exact rotation angle, both in uniformly random directions.
///
/// The translation moves by `sigma_t` meters along a random direction; the
/// rotation is composed (on the left) with a rotation of exactly
/// `sigma_r_deg` degrees about a random axis. Deterministic per seed.
pub fn perturb_extrinsics(
    tf: &RigidTransform,
    sigma_t: f64,
    sigma_r_deg: f64,
    seed: u64,
) -> Result<RigidTransform> {
    if sigma_t < 0.0 || sigma_r_deg < 0.0 {
        return Err(GeometryError::InvalidArgument(
            "perturbation magnitudes must be non-negative".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_dir = random_unit_vector(&mut rng);
    let r_axis = random_unit_vector(&mut rng);
    let translation = tf.translation + t_dir * sigma_t;
    let rotation = if sigma_r_deg == 0.0 {
        tf.rotation
    } else {
        axis_angle(&r_axis, sigma_r_deg.to_radians()) * tf.rotation
    };
    RigidTransform::new(rotation, translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::rotation_angle_between;

    fn arbitrary_tf() -> RigidTransform {
        RigidTransform::new(
            axis_angle(&Vector3::new(0.2, -0.5, 1.0), 0.7),
            Vector3::new(1.0, -2.0, 0.5),
        )
        .unwrap()
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let tf = arbitrary_tf();
        let out = perturb_extrinsics(&tf, 0.0, 0.0, 42).unwrap();
        assert_eq!(out, tf);
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let tf = arbitrary_tf();
        let a = perturb_extrinsics(&tf, 0.05, 5.0, 7).unwrap();
        let b = perturb_extrinsics(&tf, 0.05, 5.0, 7).unwrap();
        assert_eq!(a, b);
        let c = perturb_extrinsics(&tf, 0.05, 5.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rotation_angle_is_exact() {
        // Oracle: extract the angle of R_out * R_in^T.
        let tf = arbitrary_tf();
        for seed in 0..20 {
            let out = perturb_extrinsics(&tf, 0.03, 3.0, seed).unwrap();
            let angle = rotation_angle_between(&out.rotation, &tf.rotation);
            assert!(
                (angle - 3.0f64.to_radians()).abs() < 1e-9,
                "seed {seed}: angle {angle}"
            );
            let dt = (out.translation - tf.translation).norm();
            assert!((dt - 0.03).abs() < 1e-12);
        }
    }

    #[test]
    fn output_is_always_a_rotation() {
        let tf = arbitrary_tf();
        for seed in 0..50 {
            let out = perturb_extrinsics(&tf, 0.1, 10.0, seed).unwrap();
            assert!(orthonormal_drift(&out.rotation) < 1e-9);
            assert!((out.rotation.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
