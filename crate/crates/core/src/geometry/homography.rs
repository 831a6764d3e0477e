use nalgebra::{Matrix3, Vector3};

use crate::sensorio::CameraImage;

use super::camera::CameraModel;
use super::{GeometryError, Result};

/// Rotation-only homography mapping src pixels to dst pixels:
/// `H = K_dst * R_dst_src * K_src^-1`, with the relative rotation taken
/// from the two extrinsic rotations.
///
/// Exact for pure rotation between the cameras or scene at infinity.
pub fn homography(src: &CameraModel, dst: &CameraModel) -> Result<Matrix3<f64>> {
    let k_src_inv = src
        .intrinsics
        .try_inverse()
        .ok_or_else(|| GeometryError::Singular("source intrinsics".to_string()))?;
    if dst.intrinsics.determinant().abs() < 1e-12 {
        return Err(GeometryError::Singular("destination intrinsics".to_string()));
    }
    // Points: p_dst = R_dst * R_src^T * p_src.
    let r_rel = dst.rotation * src.rotation.transpose();
    Ok(dst.intrinsics * r_rel * k_src_inv)
}

/// Bilinear sample with zero padding outside the image, per channel.
fn sample_bilinear(img: &CameraImage, x: f64, y: f64, c: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let sx = x0 as i64 + dx;
            let sy = y0 as i64 + dy;
            if sx >= 0 && sy >= 0 && (sx as usize) < img.width && (sy as usize) < img.height {
                acc += wy * wx * f64::from(img.get(sy as usize, sx as usize, c));
            }
        }
    }
    acc
}

/// Warp an image by a homography using inverse mapping with bilinear
/// resampling. Destination pixels whose preimage falls outside the source
/// are zero-filled.
pub fn warp_image(
    img: &CameraImage,
    h: &Matrix3<f64>,
    out_resolution: (usize, usize),
) -> Result<CameraImage> {
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| GeometryError::Singular("homography".to_string()))?;
    let (out_w, out_h) = out_resolution;
    let mut out = vec![0f32; out_h * out_w * img.channels];
    for y in 0..out_h {
        for x in 0..out_w {
            let p = h_inv * Vector3::new(x as f64, y as f64, 1.0);
            if p.z.abs() < 1e-12 {
                continue;
            }
            let sx = p.x / p.z;
            let sy = p.y / p.z;
            if sx < -1.0 || sy < -1.0 || sx > img.width as f64 || sy > img.height as f64 {
                continue;
            }
            for c in 0..img.channels {
                out[(y * out_w + x) * img.channels + c] =
                    sample_bilinear(img, sx, sy, c) as f32;
            }
        }
    }
    CameraImage::new(img.modality, out_h, out_w, img.channels, out)
        .map_err(|e| GeometryError::InvalidArgument(e.to_string()))
}
