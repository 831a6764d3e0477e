use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SensorIoError};

/// Camera image modalities carried through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageModality {
    Rgb,
    Thermal,
    EventGrid,
}

impl ImageModality {
    fn tag(self) -> u8 {
        match self {
            ImageModality::Rgb => 0,
            ImageModality::Thermal => 1,
            ImageModality::EventGrid => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ImageModality::Rgb),
            1 => Ok(ImageModality::Thermal),
            2 => Ok(ImageModality::EventGrid),
            other => Err(SensorIoError::UnknownTag(other)),
        }
    }

    /// Channel count the modality must carry: 3 for RGB, 1 for thermal,
    /// 5 temporal bins for the event grid.
    pub fn channels(self) -> usize {
        match self {
            ImageModality::Rgb => 3,
            ImageModality::Thermal => 1,
            ImageModality::EventGrid => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImageModality::Rgb => "rgb",
            ImageModality::Thermal => "thermal",
            ImageModality::EventGrid => "event_grid",
        }
    }
}

/// Dense `H x W x C` float image, channel index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    pub modality: ImageModality,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl CameraImage {
    pub fn new(
        modality: ImageModality,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels != modality.channels() {
            return Err(SensorIoError::InvalidValue(format!(
                "modality {} requires {} channels, got {channels}",
                modality.as_str(),
                modality.channels()
            )));
        }
        if data.len() != height * width * channels {
            return Err(SensorIoError::InvalidValue(format!(
                "image buffer length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(SensorIoError::InvalidValue(
                "non-finite image value".to_string(),
            ));
        }
        Ok(CameraImage {
            modality,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(modality: ImageModality, height: usize, width: usize) -> Self {
        let channels = modality.channels();
        CameraImage {
            modality,
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Mean-pool by an integer factor; trailing rows/columns that do not
    /// fill a block are discarded.
    pub fn downsample(&self, factor: usize) -> Result<CameraImage> {
        if factor == 0 {
            return Err(SensorIoError::InvalidValue(
                "downsample factor must be positive".to_string(),
            ));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let oh = self.height / factor;
        let ow = self.width / factor;
        let mut out = vec![0f32; oh * ow * self.channels];
        let norm = 1.0 / (factor * factor) as f32;
        for y in 0..oh {
            for x in 0..ow {
                for c in 0..self.channels {
                    let mut acc = 0f32;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            acc += self.get(y * factor + dy, x * factor + dx, c);
                        }
                    }
                    out[(y * ow + x) * self.channels + c] = acc * norm;
                }
            }
        }
        Ok(CameraImage {
            modality: self.modality,
            height: oh,
            width: ow,
            channels: self.channels,
            data: out,
        })
    }
}

const GRID_MAGIC: [u8; 4] = *b"FGRD";
const GRID_VERSION: u32 = 1;

/// Write a dense float image: magic `FGRD`, version u32 LE, modality tag u8,
/// height/width/channels u32 LE, then `h*w*c` f32 LE.
pub fn write_float_grid(img: &CameraImage, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(21 + img.data.len() * 4);
    buf.extend_from_slice(&GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    buf.push(img.modality.tag());
    for dim in [img.height as u32, img.width as u32, img.channels as u32] {
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    for v in &img.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a float grid written by [`write_float_grid`].
pub fn read_float_grid(path: impl AsRef<Path>) -> Result<CameraImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(SensorIoError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != GRID_MAGIC {
        return Err(SensorIoError::BadMagic {
            expected: GRID_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < 21 {
        return Err(SensorIoError::Truncated {
            needed: 21,
            available: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != GRID_VERSION {
        return Err(SensorIoError::VersionMismatch {
            found: version,
            supported: GRID_VERSION,
        });
    }
    let modality = ImageModality::from_tag(bytes[8])?;
    let h = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(bytes[17..21].try_into().unwrap()) as usize;
    let needed = 21 + h * w * c * 4;
    if bytes.len() < needed {
        return Err(SensorIoError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    let data = bytes[21..needed]
        .chunks_exact(4)
        .map(|ch| f32::from_le_bytes(ch.try_into().unwrap()))
        .collect();
    CameraImage::new(modality, h, w, c, data)
}
