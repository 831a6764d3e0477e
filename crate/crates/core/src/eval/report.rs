use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sensorio::{ConditionTags, Light, ObjectClass, Weather};

use super::ap::{ap_from_outcomes, match_frame, DetRecord, GtRecord, MatchOutcome};

/// Per-class IoU thresholds for matching: vehicle 0.5, pedestrian 0.3,
/// bike 0.3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub vehicle: f64,
    pub pedestrian: f64,
    pub bike: f64,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        ClassThresholds {
            vehicle: 0.5,
            pedestrian: 0.3,
            bike: 0.3,
        }
    }
}

impl ClassThresholds {
    pub fn get(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::Vehicle => self.vehicle,
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Bike => self.bike,
        }
    }
}

/// Distance bins over BEV range of the box center, meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBin {
    Near,
    Mid,
    Far,
}

impl DistanceBin {
    pub const ALL: [DistanceBin; 3] = [DistanceBin::Near, DistanceBin::Mid, DistanceBin::Far];

    /// Default binning: [0, 20), [20, 40), [40, 70) meters. Ranges at or
    /// beyond 70 m fall outside every bin.
    pub fn of_range(range_m: f64) -> Option<DistanceBin> {
        if range_m < 0.0 {
            None
        } else if range_m < 20.0 {
            Some(DistanceBin::Near)
        } else if range_m < 40.0 {
            Some(DistanceBin::Mid)
        } else if range_m < 70.0 {
            Some(DistanceBin::Far)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceBin::Near => "0-20",
            DistanceBin::Mid => "20-40",
            DistanceBin::Far => "40-70",
        }
    }
}

/// Row key: one condition value on either the weather or light axis, or the
/// aggregate over all samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionKey {
    All,
    Weather(Weather),
    Light(Light),
}

impl ConditionKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionKey::All => "all",
            ConditionKey::Weather(w) => w.as_str(),
            ConditionKey::Light(l) => l.as_str(),
        }
    }

    pub fn all_keys() -> Vec<ConditionKey> {
        let mut keys = vec![ConditionKey::All];
        keys.extend(Weather::ALL.iter().map(|w| ConditionKey::Weather(*w)));
        keys.extend(Light::ALL.iter().map(|l| ConditionKey::Light(*l)));
        keys
    }

    fn matches(&self, tags: &ConditionTags) -> bool {
        match self {
            ConditionKey::All => true,
            ConditionKey::Weather(w) => tags.weather == *w,
            ConditionKey::Light(l) => tags.light == *l,
        }
    }
}

/// AP and counts for one (condition, class, bin) cell. `ap` is `None` when
/// the cell has no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApCell {
    pub ap: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gt: usize,
}

/// Evaluation report: one cell per (condition, class, distance bin), with
/// `None` bin rows aggregating over distance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct APReport {
    pub cells: BTreeMap<(ConditionKey, ObjectClass, Option<DistanceBin>), ApCell>,
}

/// Frame-level inputs to the breakdown: the predictions and ground truths of
/// one frame plus its sequence-level condition tags.
#[derive(Debug, Clone)]
pub struct FrameEval {
    pub frame_id: u64,
    pub tags: ConditionTags,
    pub preds: Vec<DetRecord>,
    pub gts: Vec<GtRecord>,
}

fn eval_subset(
    frames: &[&FrameEval],
    class: ObjectClass,
    bin: Option<DistanceBin>,
    iou_thresh: f64,
) -> ApCell {
    // Filter per frame, keeping frame ids so matching stays frame-local.
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for f in frames {
        preds.extend(
            f.preds
                .iter()
                .filter(|p| {
                    p.b.class == class
                        && bin.map_or(true, |bb| {
                            DistanceBin::of_range(p.b.bev_range()) == Some(bb)
                        })
                })
                .cloned(),
        );
        gts.extend(
            f.gts
                .iter()
                .filter(|g| {
                    g.b.class == class
                        && bin.map_or(true, |bb| {
                            DistanceBin::of_range(g.b.bev_range()) == Some(bb)
                        })
                })
                .cloned(),
        );
    }
    let gt_count = gts.len();
    if gt_count == 0 {
        return ApCell {
            ap: None,
            tp: 0,
            fp: preds.len(),
            fn_: 0,
            gt: 0,
        };
    }
    let (outcomes, _) = match_frame(&preds, &gts, iou_thresh);
    let tp = outcomes
        .iter()
        .filter(|o| matches!(o, MatchOutcome::TruePositive(_)))
        .count();
    let fp = outcomes.len() - tp;
    let ap = if preds.is_empty() {
        0.0
    } else {
        ap_from_outcomes(&outcomes, gt_count)
    };
    ApCell {
        ap: Some(ap),
        tp,
        fp,
        fn_: gt_count - tp,
        gt: gt_count,
    }
}

/// Full AP breakdown by condition value, class, and distance bin.
pub fn breakdown(frames: &[FrameEval], thresholds: &ClassThresholds) -> APReport {
    let mut report = APReport::default();
    for key in ConditionKey::all_keys() {
        let subset: Vec<&FrameEval> = frames.iter().filter(|f| key.matches(&f.tags)).collect();
        for class in ObjectClass::ALL {
            let thresh = thresholds.get(class);
            for bin in std::iter::once(None).chain(DistanceBin::ALL.iter().map(|b| Some(*b))) {
                let cell = eval_subset(&subset, class, bin, thresh);
                report.cells.insert((key, class, bin), cell);
            }
        }
    }
    report
}

impl APReport {
    /// CSV rows: `condition,class,bin,ap,tp,fp,fn,gt`. AP rendered with six
    /// decimals, empty when absent. Deterministic order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,class,bin,ap,tp,fp,fn,gt\n");
        for ((key, class, bin), cell) in &self.cells {
            let ap = cell.ap.map_or(String::new(), |a| format!("{a:.6}"));
            let bin_s = bin.map_or("all", |b| b.as_str());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                key.as_str(),
                class.as_str(),
                bin_s,
                ap,
                cell.tp,
                cell.fp,
                cell.fn_,
                cell.gt
            ));
        }
        out
    }

    /// Markdown table of vehicle AP per condition column, mirroring the
    /// benchmark table layout (weather columns then light columns).
    pub fn to_markdown(&self) -> String {
        let mut header = String::from("| Class |");
        let mut sep = String::from("|---|");
        for w in Weather::ALL {
            header.push_str(&format!(" {} |", w.as_str()));
            sep.push_str("---|");
        }
        for l in Light::ALL {
            header.push_str(&format!(" {} |", l.as_str()));
            sep.push_str("---|");
        }
        let mut out = format!("{header}\n{sep}\n");
        for class in ObjectClass::ALL {
            let mut row = format!("| {} |", class.as_str());
            for key in Weather::ALL
                .iter()
                .map(|w| ConditionKey::Weather(*w))
                .chain(Light::ALL.iter().map(|l| ConditionKey::Light(*l)))
            {
                let cell = self.cells.get(&(key, class, None));
                let s = match cell.and_then(|c| c.ap) {
                    Some(ap) => format!("{:.2}", ap * 100.0),
                    None => "N/A".to_string(),
                };
                row.push_str(&format!(" {s} |"));
            }
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    /// AP of one cell, if present and defined.
    pub fn ap(
        &self,
        key: ConditionKey,
        class: ObjectClass,
        bin: Option<DistanceBin>,
    ) -> Option<f64> {
        self.cells.get(&(key, class, bin)).and_then(|c| c.ap)
    }
}

/// Ground-truth statistics: object counts per class, weather, and distance
/// bin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub per_class_bin: BTreeMap<(ObjectClass, Option<DistanceBin>), usize>,
    pub per_weather_bin: BTreeMap<(Weather, Option<DistanceBin>), usize>,
    pub total_boxes: usize,
    pub total_frames: usize,
}

/// Count ground-truth boxes by class / weather across distance bins.
pub fn dataset_stats(frames: &[FrameEval]) -> DatasetStats {
    let mut stats = DatasetStats {
        total_frames: frames.len(),
        ..Default::default()
    };
    for f in frames {
        for g in &f.gts {
            let bin = DistanceBin::of_range(g.b.bev_range());
            stats.total_boxes += 1;
            *stats.per_class_bin.entry((g.b.class, None)).or_default() += 1;
            *stats
                .per_weather_bin
                .entry((f.tags.weather, None))
                .or_default() += 1;
            if let Some(b) = bin {
                *stats.per_class_bin.entry((g.b.class, Some(b))).or_default() += 1;
                *stats
                    .per_weather_bin
                    .entry((f.tags.weather, Some(b)))
                    .or_default() += 1;
            }
        }
    }
    stats
}
