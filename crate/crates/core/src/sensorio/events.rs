use serde::{Deserialize, Serialize};

use super::image::{CameraImage, ImageModality};
use super::{Result, SensorIoError};

/// One brightness-change event: pixel, timestamp in microseconds, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: i64,
    /// +1 or -1.
    pub polarity: i8,
}

/// Asynchronous event stream from one event camera.
///
/// Events are sorted non-decreasing in time; pixel coordinates lie inside
/// the sensor resolution; polarity is +-1. Timestamps are integer
/// microseconds so temporal binning is free of float drift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStream {
    pub width: u32,
    pub height: u32,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u32, height: u32, events: Vec<Event>) -> Result<Self> {
        let mut last = i64::MIN;
        for e in &events {
            if e.polarity != 1 && e.polarity != -1 {
                return Err(SensorIoError::InvalidValue(format!(
                    "event polarity must be +-1, got {}",
                    e.polarity
                )));
            }
            if u32::from(e.x) >= width || u32::from(e.y) >= height {
                return Err(SensorIoError::InvalidValue(format!(
                    "event pixel ({}, {}) outside {}x{}",
                    e.x, e.y, width, height
                )));
            }
            if e.t < last {
                return Err(SensorIoError::InvalidValue(
                    "events not sorted by timestamp".to_string(),
                ));
            }
            last = e.t;
        }
        Ok(EventStream {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamp span `(first, last)`, if any events exist.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => Some((a.t, b.t)),
            _ => None,
        }
    }
}

/// Accumulate an event stream into an `H x W x bins` voxel grid with
/// bilinear temporal weights.
///
/// Each event at normalized time `tau = (t - t0) / (t1 - t0) * (bins - 1)`
/// deposits `polarity * (1 - |tau - b|)` into each adjacent bin `b`, so the
/// deposited magnitude per event sums to one. Accumulation is polarity-signed
/// into a single grid.
pub fn events_to_voxel_grid(
    stream: &EventStream,
    bins: usize,
    window: (i64, i64),
) -> Result<CameraImage> {
    let (t0, t1) = window;
    if t1 <= t0 {
        return Err(SensorIoError::ZeroLengthWindow { t0, t1 });
    }
    if bins == 0 {
        return Err(SensorIoError::InvalidValue(
            "bin count must be positive".to_string(),
        ));
    }
    let h = stream.height as usize;
    let w = stream.width as usize;
    let mut data = vec![0f32; h * w * bins];
    let span = (t1 - t0) as f64;
    for e in &stream.events {
        if e.t < t0 || e.t > t1 {
            return Err(SensorIoError::EventOutsideWindow { t: e.t, t0, t1 });
        }
        let tau = (e.t - t0) as f64 / span * (bins as f64 - 1.0);
        let b0 = tau.floor() as usize;
        let frac = tau - b0 as f64;
        let base = (e.y as usize * w + e.x as usize) * bins;
        let pol = f64::from(e.polarity);
        data[base + b0] += (pol * (1.0 - frac)) as f32;
        if frac > 0.0 && b0 + 1 < bins {
            data[base + b0 + 1] += (pol * frac) as f32;
        }
    }
    CameraImage::new(ImageModality::EventGrid, h, w, bins, data)
}
