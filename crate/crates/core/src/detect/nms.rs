use crate::eval::iou3d;
use crate::sensorio::Box3D;

/// Greedy oriented non-maximum suppression.
///
/// Boxes are visited in descending score order (stable on ties); a box is
/// kept iff its 3D IoU with every already-kept box stays at or below the
/// threshold. Returns kept boxes in that order. Idempotent.
pub fn nms(boxes: &[Box3D], iou_thresh: f64) -> Vec<Box3D> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        let si = boxes[i].score.unwrap_or(0.0);
        let sj = boxes[j].score.unwrap_or(0.0);
        sj.partial_cmp(&si).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<Box3D> = Vec::new();
    for &i in &order {
        let candidate = &boxes[i];
        if kept.iter().all(|k| iou3d(candidate, k) <= iou_thresh) {
            kept.push(candidate.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensorio::ObjectClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scored(center: [f64; 3], yaw: f64, score: f64) -> Box3D {
        Box3D::new(center, [2.0, 1.0, 1.0], yaw, ObjectClass::Vehicle)
            .unwrap()
            .with_score(score)
    }

    #[test]
    fn duplicate_boxes_keep_only_highest_score() {
        let a = scored([0.0; 3], 0.3, 0.9);
        let b = scored([0.0; 3], 0.3, 0.8);
        let kept = nms(&[b, a.clone()], 0.7);
        assert_eq!(kept, vec![a]);
    }

    #[test]
    fn disjoint_boxes_all_survive() {
        let a = scored([0.0; 3], 0.0, 0.9);
        let b = scored([10.0, 0.0, 0.0], 1.0, 0.5);
        let kept = nms(&[a.clone(), b.clone()], 0.7);
        assert_eq!(kept, vec![a, b]);
    }

    fn random_boxes(seed: u64, n: usize) -> Vec<Box3D> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                scored(
                    [
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(-0.5..0.5),
                    ],
                    rng.gen_range(-3.1..3.1),
                    rng.gen_range(0.0..1.0),
                )
            })
            .collect()
    }

    /// Quadratic reference: explicit suppression matrix then greedy scan.
    fn nms_reference(boxes: &[Box3D], thresh: f64) -> Vec<Box3D> {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.sort_by(|&i, &j| {
            boxes[j]
                .score
                .unwrap()
                .partial_cmp(&boxes[i].score.unwrap())
                .unwrap()
        });
        let n = boxes.len();
        let mut iou = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                iou[i][j] = iou3d(&boxes[i], &boxes[j]);
            }
        }
        let mut kept_idx: Vec<usize> = Vec::new();
        for &i in &order {
            if kept_idx.iter().all(|&k| iou[i][k] <= thresh) {
                kept_idx.push(i);
            }
        }
        kept_idx.into_iter().map(|i| boxes[i].clone()).collect()
    }

    #[test]
    fn matches_quadratic_reference_on_random_instances() {
        for seed in 0..50 {
            let boxes = random_boxes(seed, 20);
            assert_eq!(nms(&boxes, 0.7), nms_reference(&boxes, 0.7), "seed {seed}");
        }
    }

    #[test]
    fn output_is_subset_and_idempotent() {
        for seed in 0..20 {
            let boxes = random_boxes(100 + seed, 25);
            let kept = nms(&boxes, 0.7);
            for k in &kept {
                assert!(boxes.contains(k));
            }
            assert_eq!(nms(&kept, 0.7), kept);
        }
    }
}
