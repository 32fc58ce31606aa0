//! Scoring of model predictions against a generated benchmark.
//!
//! Discrete categories use accuracy, metric categories use accuracy within
//! 10% relative error, 2D and 3D grounding use AP at IoU 0.50 and 0.15. The
//! aggregate is the unweighted mean of the categories present.

mod metrics;
mod parse;

pub use metrics::*;
pub use parse::*;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou_2d, iou_3d_yaw, Box2D};
use crate::qa::{Answer, Category, QaRecord};
use crate::scene::Scene;
use crate::DepthSource;

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Resolves ground-truth depth medians for the depth-estimation block.
pub trait DepthLookup {
    /// Median GT depth inside `bbox` of the given frame.
    fn gt_median(&self, video_id: &str, frame_id: &str, bbox: &Box2D) -> Option<f64>;
}

/// GT depth lookup over in-memory scenes.
pub struct SceneDepth<'a>(pub &'a [Scene]);

impl DepthLookup for SceneDepth<'_> {
    fn gt_median(&self, video_id: &str, frame_id: &str, bbox: &Box2D) -> Option<f64> {
        let scene = self.0.iter().find(|s| s.video_id == video_id)?;
        let depth = scene.frame(frame_id)?.depth(DepthSource::Gt)?;
        let clamped = bbox.clamp_to_image(depth.width(), depth.height());
        depth.median_in_box(&clamped).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    AccuracyAt10PctRelErr,
    Ap50,
    Ap15,
}

impl MetricName {
    pub fn for_category(category: Category) -> MetricName {
        match category {
            c if c.is_regression() => MetricName::AccuracyAt10PctRelErr,
            Category::Grounding2d => MetricName::Ap50,
            Category::Grounding3d => MetricName::Ap15,
            _ => MetricName::Accuracy,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Accuracy => "Acc",
            MetricName::AccuracyAt10PctRelErr => "Acc@10%",
            MetricName::Ap50 => "AP@50",
            MetricName::Ap15 => "AP@15",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: Category,
    pub metric: MetricName,
    pub value: f64,
    pub records: usize,
    pub parse_failures: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub records: usize,
    /// Records with at least one prediction.
    pub evaluated: usize,
    pub parse_failures: usize,
    /// Records without any prediction (scored as wrong).
    pub missing: usize,
    /// Predictions whose record id is not in the benchmark (ignored).
    pub unknown_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregation: String,
    pub categories: Vec<CategoryScore>,
    /// Unweighted mean over present categories; `None` for an empty benchmark.
    pub average: Option<f64>,
    pub counts: EvalCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthScores>,
}

pub const AGGREGATION_NOTE: &str = "unweighted mean over categories present in the benchmark";

impl EvalReport {
    pub fn score(&self, category: Category) -> Option<&CategoryScore> {
        self.categories.iter().find(|c| c.category == category)
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# average: {AGGREGATION_NOTE}");
        let _ = writeln!(
            out,
            "{:<24} {:<8} {:>8} {:>8} {:>8} {:>8}",
            "category", "metric", "value", "records", "unparsed", "missing"
        );
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<24} {:<8} {:>8.2} {:>8} {:>8} {:>8}",
                c.category.name(),
                c.metric.label(),
                c.value,
                c.records,
                c.parse_failures,
                c.missing
            );
        }
        let avg = self.average.map_or_else(|| String::from("n/a"), |a| format!("{a:.2}"));
        let _ = writeln!(out, "{:<24} {:<8} {:>8}", "average", "", avg);
        if let Some(d) = &self.depth {
            let _ = writeln!(out, "{:<24} {:<8} {:>8.2} {:>8}", "depth", "delta1", d.delta1, d.pairs);
            let _ = writeln!(out, "{:<24} {:<8} {:>8.2} {:>8}", "depth", "AbsRel", d.abs_rel, d.pairs);
        }
        let c = &self.counts;
        let _ = writeln!(
            out,
            "records {} evaluated {} parse_failures {} missing {} unknown_predictions {}",
            c.records, c.evaluated, c.parse_failures, c.missing, c.unknown_predictions
        );
        out
    }
}

/// Accuracy (0..=100) of single-answer records; the first prediction per
/// record counts, missing ones are wrong.
pub fn score_accuracy(records: &[&QaRecord], predictions: &BTreeMap<&str, Vec<&Prediction>>, tolerance: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let correct = records
        .iter()
        .filter(|r| {
            predictions
                .get(r.record_id.as_str())
                .and_then(|p| p.first())
                .and_then(|p| parse_answer(&p.raw_text, r.category).ok())
                .is_some_and(|a| answer_matches(&r.answer, &a, tolerance))
        })
        .count();
    100.0 * correct as f64 / records.len() as f64
}

/// AP (0..=100) for grounding records; every prediction of a record is a
/// detection for that record's single ground-truth box.
pub fn score_ap(
    records: &[&QaRecord],
    predictions: &BTreeMap<&str, Vec<&Prediction>>,
    threshold: f64,
) -> f64 {
    let mut detections = Vec::new();
    for (gt_index, r) in records.iter().enumerate() {
        for p in predictions.get(r.record_id.as_str()).into_iter().flatten() {
            let iou = match (&r.answer, parse_answer(&p.raw_text, r.category)) {
                (Answer::Box2d(g), Ok(Answer::Box2d(b))) => Some(iou_2d(g, &b)),
                (Answer::Box3d(g), Ok(Answer::Box3d(b))) => Some(iou_3d_yaw(g, &b)),
                _ => None,
            };
            detections.push(Detection {
                gt_index,
                confidence: p.confidence.unwrap_or(1.0),
                iou,
            });
        }
    }
    average_precision(&detections, records.len(), threshold)
}

/// Scores `predictions` against `records`. With `depth`, CoT depth steps in
/// predictions are compared to the GT median inside each predicted box.
pub fn evaluate(records: &[QaRecord], predictions: &[Prediction], depth: Option<&dyn DepthLookup>) -> EvalReport {
    let known: BTreeMap<&str, &QaRecord> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    let mut by_record: BTreeMap<&str, Vec<&Prediction>> = BTreeMap::new();
    let mut counts = EvalCounts { records: records.len(), ..Default::default() };
    for p in predictions {
        if known.contains_key(p.record_id.as_str()) {
            by_record.entry(p.record_id.as_str()).or_default().push(p);
        } else {
            counts.unknown_predictions += 1;
        }
    }
    let mut grouped: BTreeMap<Category, Vec<&QaRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.category).or_default().push(r);
    }
    let mut categories = Vec::new();
    for (category, recs) in &grouped {
        let metric = MetricName::for_category(*category);
        let mut missing = 0;
        let mut parse_failures = 0;
        for r in recs {
            match by_record.get(r.record_id.as_str()) {
                None => missing += 1,
                Some(ps) => {
                    parse_failures += ps
                        .iter()
                        .filter(|p| parse_answer(&p.raw_text, r.category).is_err())
                        .count()
                }
            }
        }
        let value = match metric {
            MetricName::Accuracy | MetricName::AccuracyAt10PctRelErr => {
                score_accuracy(recs, &by_record, DEFAULT_RELATIVE_TOLERANCE)
            }
            MetricName::Ap50 => score_ap(recs, &by_record, AP2D_IOU),
            MetricName::Ap15 => score_ap(recs, &by_record, AP3D_IOU),
        };
        counts.missing += missing;
        counts.parse_failures += parse_failures;
        counts.evaluated += recs.len() - missing;
        categories.push(CategoryScore {
            category: *category,
            metric,
            value,
            records: recs.len(),
            parse_failures,
            missing,
        });
    }
    let average = (!categories.is_empty())
        .then(|| categories.iter().map(|c| c.value).sum::<f64>() / categories.len() as f64);
    let depth = depth.and_then(|lookup| {
        let mut pairs = Vec::new();
        for (id, ps) in &by_record {
            let r = known[id];
            for p in ps {
                for step in parse_cot_depths(&p.raw_text) {
                    if let Some(gt) = lookup.gt_median(&r.video_id, &r.frame_id, &step.bbox) {
                        pairs.push((step.meters, gt));
                    }
                }
            }
        }
        score_depth_estimates(&pairs).ok()
    });
    EvalReport {
        aggregation: AGGREGATION_NOTE.into(),
        categories,
        average,
        counts,
        depth,
    }
}

/// Predictions that restate each record's ground truth, through the CoT
/// grammar when the record has depth steps.
pub fn oracle_predictions(records: &[QaRecord]) -> Vec<Prediction> {
    records
        .iter()
        .map(|r| Prediction {
            record_id: r.record_id.clone(),
            raw_text: r.cot_text().unwrap_or_else(|| r.answer_text()),
            confidence: None,
        })
        .collect()
}
