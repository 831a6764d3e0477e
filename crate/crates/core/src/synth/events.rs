use crate::sensorio::{Event, EventStream};

use super::{Result, SynthError};

/// Dense single-channel intensity raster used as the event-synthesis input.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRaster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl IntensityRaster {
    pub fn new(height: usize, width: usize) -> Self {
        IntensityRaster {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }
}

const LOG_EPS: f64 = 1e-4;

/// Synthesize events from two intensity rasters: one event per pixel whose
/// log-intensity change reaches the threshold, polarity the sign of the
/// change, timestamped midway between the two frames.
pub fn synth_events(
    frame_a: &IntensityRaster,
    frame_b: &IntensityRaster,
    threshold: f64,
    t_a_us: i64,
    t_b_us: i64,
) -> Result<EventStream> {
    if frame_a.height != frame_b.height || frame_a.width != frame_b.width {
        return Err(SynthError::ShapeMismatch(format!(
            "raster {}x{} vs {}x{}",
            frame_a.height, frame_a.width, frame_b.height, frame_b.width
        )));
    }
    if threshold <= 0.0 {
        return Err(SynthError::InvalidSpec(
            "event threshold must be positive".to_string(),
        ));
    }
    let t_mid = (t_a_us + t_b_us) / 2;
    let mut events = Vec::new();
    for y in 0..frame_a.height {
        for x in 0..frame_a.width {
            let a = f64::from(frame_a.get(y, x)).max(0.0) + LOG_EPS;
            let b = f64::from(frame_b.get(y, x)).max(0.0) + LOG_EPS;
            let d = (b / a).ln();
            if d.abs() >= threshold {
                events.push(Event {
                    x: x as u16,
                    y: y as u16,
                    t: t_mid,
                    polarity: if d > 0.0 { 1 } else { -1 },
                });
            }
        }
    }
    Ok(EventStream::new(
        frame_a.width as u32,
        frame_a.height as u32,
        events,
    )?)
}
