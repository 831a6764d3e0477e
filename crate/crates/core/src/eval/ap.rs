use crate::sensorio::{Box3D, ObjectClass};

use super::iou::iou3d;

/// One prediction to score: frame id, box (carrying its score), class.
#[derive(Debug, Clone)]
pub struct DetRecord {
    pub frame_id: u64,
    pub b: Box3D,
}

/// One ground-truth box.
#[derive(Debug, Clone)]
pub struct GtRecord {
    pub frame_id: u64,
    pub b: Box3D,
}

/// Per-prediction outcome of greedy matching, in score order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Matched the ground truth with the given index.
    TruePositive(usize),
    FalsePositive,
}

/// Greedy per-frame matching: predictions in descending score order, each
/// taking the highest-IoU unmatched ground truth of the same frame if that
/// IoU reaches the threshold. Returns outcomes aligned with the sorted
/// prediction order, plus that order's indices into `preds`.
pub fn match_frame(
    preds: &[DetRecord],
    gts: &[GtRecord],
    iou_thresh: f64,
) -> (Vec<MatchOutcome>, Vec<usize>) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    // stable sort by descending score; ties keep insertion order
    order.sort_by(|&i, &j| {
        let si = preds[i].b.score.unwrap_or(0.0);
        let sj = preds[j].b.score.unwrap_or(0.0);
        sj.partial_cmp(&si).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut taken = vec![false; gts.len()];
    let mut outcomes = Vec::with_capacity(preds.len());
    for &pi in &order {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] || g.frame_id != p.frame_id || g.b.class != p.b.class {
                continue;
            }
            let iou = iou3d(&p.b, &g.b);
            if iou >= iou_thresh && best.map_or(true, |(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, _)) => {
                taken[gi] = true;
                outcomes.push(MatchOutcome::TruePositive(gi));
            }
            None => outcomes.push(MatchOutcome::FalsePositive),
        }
    }
    (outcomes, order)
}

/// Average precision for one class at one IoU threshold.
///
/// All-point interpolation: the area under the precision-recall curve with
/// precision made monotone by a right-to-left running maximum. Returns
/// `None` when the class has no ground truth (reported as absent).
pub fn average_precision(
    preds: &[DetRecord],
    gts: &[GtRecord],
    class: ObjectClass,
    iou_thresh: f64,
) -> Option<f64> {
    let class_preds: Vec<DetRecord> = preds
        .iter()
        .filter(|p| p.b.class == class)
        .cloned()
        .collect();
    let class_gts: Vec<GtRecord> = gts.iter().filter(|g| g.b.class == class).cloned().collect();
    if class_gts.is_empty() {
        return None;
    }
    if class_preds.is_empty() {
        return Some(0.0);
    }
    let (outcomes, _) = match_frame(&class_preds, &class_gts, iou_thresh);
    Some(ap_from_outcomes(&outcomes, class_gts.len()))
}

/// Area under the all-point-interpolated PR curve given ranked outcomes.
pub(crate) fn ap_from_outcomes(outcomes: &[MatchOutcome], gt_count: usize) -> f64 {
    debug_assert!(gt_count > 0);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut precisions = Vec::with_capacity(outcomes.len());
    let mut recalls = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            MatchOutcome::TruePositive(_) => tp += 1,
            MatchOutcome::FalsePositive => fp += 1,
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / gt_count as f64);
    }
    // right-to-left maximum makes precision monotone non-increasing in recall
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precisions.iter().zip(&recalls) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}
