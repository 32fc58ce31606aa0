use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qa::Answer;

/// Relative error accepted by the regression accuracy metric.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 0.10;
/// Ratio bound of the δ1 depth metric (strict).
pub const DELTA1_RATIO: f64 = 1.25;
/// IoU thresholds for 2D and 3D grounding AP.
pub const AP2D_IOU: f64 = 0.50;
pub const AP3D_IOU: f64 = 0.15;

// absorbs representation error at exactly the tolerance (1.1 vs 1.0)
const TOLERANCE_SLACK: f64 = 1e-12;

/// True when `pred` is within `tolerance` relative error of `gt`.
pub fn within_relative(pred: f64, gt: f64, tolerance: f64) -> bool {
    pred.is_finite() && gt > 0.0 && (pred - gt).abs() / gt <= tolerance + TOLERANCE_SLACK
}

/// Exact match for discrete answers, relative tolerance for metric ones.
/// Boxes are never "correct" in this sense; grounding uses AP.
pub fn answer_matches(gt: &Answer, pred: &Answer, tolerance: f64) -> bool {
    match (gt, pred) {
        (Answer::Binary(a), Answer::Binary(b)) => a == b,
        (Answer::Count(a), Answer::Count(b)) => a == b,
        (Answer::Choice(a), Answer::Choice(b)) => a == b,
        (Answer::Metric(g), Answer::Metric(p)) => within_relative(*p, *g, tolerance),
        _ => false,
    }
}

/// One scored detection for AP: which ground truth it targets, its
/// confidence and its IoU with that ground truth (`None` if unparseable).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub gt_index: usize,
    pub confidence: f64,
    pub iou: Option<f64>,
}

/// Average precision (0..=100) with greedy confidence-ordered matching and
/// all-point interpolation. Equal confidences keep input order.
pub fn average_precision(detections: &[Detection], num_gt: usize, threshold: f64) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<&Detection> = detections.iter().filter(|d| d.iou.is_some()).collect();
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut matched = alloc::vec![false; num_gt];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    for d in order {
        let hit = d.iou.is_some_and(|iou| iou >= threshold) && !matched[d.gt_index];
        if hit {
            matched[d.gt_index] = true;
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // precision envelope from the right, then sum over recall steps
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    100.0 * ap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthScores {
    /// Percentage of pairs with `max(pred/gt, gt/pred) < 1.25`.
    pub delta1: f64,
    /// Mean absolute relative error, percent.
    pub abs_rel: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepthMetricError {
    #[error("no depth pairs to score")]
    EmptySet,
    #[error("ground-truth depth must be positive")]
    NonPositiveGroundTruth,
}

/// δ1 and AbsRel over `(pred, gt)` pairs in meters.
pub fn score_depth_estimates(pairs: &[(f64, f64)]) -> Result<DepthScores, DepthMetricError> {
    if pairs.is_empty() {
        return Err(DepthMetricError::EmptySet);
    }
    if pairs.iter().any(|(_, g)| !(*g > 0.0)) {
        return Err(DepthMetricError::NonPositiveGroundTruth);
    }
    let mut hits = 0usize;
    let mut rel = 0.0;
    for &(p, g) in pairs {
        if p > 0.0 && (p / g).max(g / p) < DELTA1_RATIO {
            hits += 1;
        }
        rel += (p - g).abs() / g;
    }
    let n = pairs.len() as f64;
    Ok(DepthScores {
        delta1: 100.0 * hits as f64 / n,
        abs_rel: 100.0 * rel / n,
        pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn det(gt_index: usize, confidence: f64, iou: f64) -> Detection {
        Detection { gt_index, confidence, iou: Some(iou) }
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[det(0, 1.0, 0.9)], 1, 0.5), 100.0);
        // TP then FP
        assert_eq!(average_precision(&[det(0, 0.9, 0.9), det(0, 0.1, 0.2)], 1, 0.5), 100.0);
        // FP then TP
        assert_eq!(average_precision(&[det(0, 0.9, 0.2), det(0, 0.1, 0.9)], 1, 0.5), 50.0);
        let failures = [Detection { gt_index: 0, confidence: 1.0, iou: None }];
        assert_eq!(average_precision(&failures, 1, 0.5), 0.0);
        assert_eq!(average_precision(&[], 3, 0.5), 0.0);
    }

    #[test]
    fn ap_ignores_input_order_when_confidences_differ() {
        let a = vec![det(0, 0.3, 0.9), det(1, 0.8, 0.1), det(2, 0.5, 0.7), det(1, 0.2, 0.6)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(average_precision(&a, 3, 0.5), average_precision(&b, 3, 0.5));
    }

    #[test]
    fn relative_tolerance_examples() {
        assert!(within_relative(1.05, 1.0, 0.1));
        assert!(!within_relative(1.11, 1.0, 0.1));
        assert!(within_relative(1.1, 1.0, 0.1));
        assert!(within_relative(2.0, 2.0, 0.1));
        assert!(!within_relative(f64::NAN, 2.0, 0.1));
    }

    #[test]
    fn depth_examples() {
        let s = score_depth_estimates(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!((s.delta1, s.abs_rel), (100.0, 0.0));
        let s = score_depth_estimates(&[(1.2, 1.0)]).unwrap();
        assert_eq!(s.delta1, 100.0);
        assert!((s.abs_rel - 20.0).abs() < 1e-9);
        assert_eq!(score_depth_estimates(&[(1.3, 1.0)]).unwrap().delta1, 0.0);
        assert_eq!(score_depth_estimates(&[(1.25, 1.0)]).unwrap().delta1, 0.0);
        assert_eq!(score_depth_estimates(&[(0.8, 1.0)]).unwrap().delta1, 0.0);
        assert_eq!(score_depth_estimates(&[]), Err(DepthMetricError::EmptySet));
    }
}
