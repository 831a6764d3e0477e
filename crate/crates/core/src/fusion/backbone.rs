use crate::nn::Conv2d;
use crate::sensorio::{CameraImage, ImageModality};

use super::{FusionError, Result};

/// Dense image feature map at 1/4 of the (possibly pre-downsampled) input,
/// remembering the full-resolution source size so projected pixel
/// coordinates can be rescaled into feature-map coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureMap {
    pub modality: ImageModality,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    /// Full-resolution source image size (width, height) in pixels.
    pub source_resolution: (u32, u32),
}

impl ImageFeatureMap {
    /// Scale factors taking full-resolution pixel coordinates to feature-map
    /// coordinates.
    pub fn pixel_scale(&self) -> (f64, f64) {
        (
            self.width as f64 / f64::from(self.source_resolution.0),
            self.height as f64 / f64::from(self.source_resolution.1),
        )
    }
}

/// Small 2D backbone stub: two stride-2 3x3 convolutions, ReLU after each,
/// replacing the trained image backbone while keeping the stride-4 output
/// geometry.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BackboneStub {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    /// Integer pre-downsampling factor applied before the convs
    /// (4 for RGB, 1 for thermal, 2 for the event grid).
    pub pre_downsample: usize,
}

impl BackboneStub {
    pub fn seeded(modality: ImageModality, c_i: usize, seed: u64) -> Self {
        let in_c = modality.channels();
        BackboneStub {
            conv1: Conv2d::seeded(c_i, in_c, 3, 2, 1, seed).with_relu(true),
            conv2: Conv2d::seeded(c_i, c_i, 3, 2, 1, seed.wrapping_add(1)).with_relu(true),
            pre_downsample: default_downsample(modality),
        }
    }

    /// Zero weights and biases (no ReLU needed to produce zero output).
    pub fn zeros(modality: ImageModality, c_i: usize) -> Self {
        let in_c = modality.channels();
        BackboneStub {
            conv1: Conv2d::zeros(c_i, in_c, 3, 2, 1),
            conv2: Conv2d::zeros(c_i, c_i, 3, 2, 1),
            pre_downsample: default_downsample(modality),
        }
    }
}

/// Input downsampling ratios: RGB to 1/4, thermal kept, events to 1/2.
pub fn default_downsample(modality: ImageModality) -> usize {
    match modality {
        ImageModality::Rgb => 4,
        ImageModality::Thermal => 1,
        ImageModality::EventGrid => 2,
    }
}

/// Run the backbone stub: pre-downsample, then the stride-4 conv pair.
pub fn extract_image_features(img: &CameraImage, stub: &BackboneStub) -> Result<ImageFeatureMap> {
    if stub.conv1.in_c != img.channels {
        return Err(FusionError::ShapeMismatch(format!(
            "stub expects {} channels, image has {}",
            stub.conv1.in_c, img.channels
        )));
    }
    let source_resolution = (img.width as u32, img.height as u32);
    let small = img
        .downsample(stub.pre_downsample)
        .map_err(|e| FusionError::ShapeMismatch(e.to_string()))?;
    let data: Vec<f64> = small.data.iter().map(|v| f64::from(*v)).collect();
    let (h1, h1h, h1w) = stub.conv1.forward(&data, small.height, small.width)?;
    let (out, oh, ow) = stub.conv2.forward(&h1, h1h, h1w)?;
    Ok(ImageFeatureMap {
        modality: img.modality,
        height: oh,
        width: ow,
        channels: stub.conv2.out_c,
        data: out,
        source_resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub_no_downsample(modality: ImageModality, c_i: usize, seed: u64) -> BackboneStub {
        let mut s = BackboneStub::seeded(modality, c_i, seed);
        s.pre_downsample = 1;
        s
    }

    #[test]
    fn output_is_quarter_resolution() {
        let img = CameraImage::zeros(ImageModality::Thermal, 64, 64);
        let fm =
            extract_image_features(&img, &stub_no_downsample(ImageModality::Thermal, 8, 3))
                .unwrap();
        assert_eq!((fm.height, fm.width, fm.channels), (16, 16, 8));
    }

    #[test]
    fn zero_image_zero_bias_gives_zero_features() {
        let img = CameraImage::zeros(ImageModality::Rgb, 32, 32);
        let fm = extract_image_features(&img, &stub_no_downsample(ImageModality::Rgb, 4, 7))
            .unwrap();
        assert!(fm.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_image_linear_stub_gives_kernel_sum_interior() {
        // Oracle: direct convolution of a constant field is the kernel sum
        // times the value, away from borders.
        let mut img = CameraImage::zeros(ImageModality::Thermal, 33, 33);
        for v in &mut img.data {
            *v = 0.5;
        }
        let mut stub = stub_no_downsample(ImageModality::Thermal, 1, 11);
        stub.conv1.relu = false;
        stub.conv2.relu = false;
        let s1: f64 = stub.conv1.weight.iter().sum();
        let s2: f64 = stub.conv2.weight.iter().sum();
        let expected = 0.5 * s1 * s2;
        let fm = extract_image_features(&img, &stub).unwrap();
        let center = fm.data[(fm.height / 2 * fm.width + fm.width / 2) * fm.channels];
        assert!(
            (center - expected).abs() < 1e-9,
            "center {center}, expected {expected}"
        );
    }

    #[test]
    fn pre_downsampling_shrinks_source_mapping() {
        let img = CameraImage::zeros(ImageModality::Rgb, 64, 64);
        let stub = BackboneStub::seeded(ImageModality::Rgb, 4, 5);
        let fm = extract_image_features(&img, &stub).unwrap();
        // 64 / 4 (pre) = 16, then /4 (convs) = 4
        assert_eq!((fm.height, fm.width), (4, 4));
        let (sx, sy) = fm.pixel_scale();
        assert!((sx - 4.0 / 64.0).abs() < 1e-12);
        assert!((sy - 4.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let img = CameraImage::zeros(ImageModality::Thermal, 16, 16);
        let stub = BackboneStub::seeded(ImageModality::Rgb, 4, 0);
        assert!(matches!(
            extract_image_features(&img, &stub),
            Err(FusionError::ShapeMismatch(_))
        ));
    }
}
