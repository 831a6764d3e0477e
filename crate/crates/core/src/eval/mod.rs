//! Evaluation: rotated 3D IoU, 2D IoU, per-class average precision at the
//! benchmark thresholds, and breakdowns by weather, light, and distance bin.

mod ap;
mod iou;
mod report;

pub use ap::{average_precision, match_frame, DetRecord, GtRecord, MatchOutcome};
pub use iou::{iou2d, iou3d};
pub use report::{
    breakdown, dataset_stats, APReport, ApCell, ClassThresholds, ConditionKey, DatasetStats,
    DistanceBin, FrameEval,
};
