use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box2D, OrientedBox3D};

/// Task category of a generated question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "binary_viewpoint")]
    BinaryViewpoint,
    #[serde(rename = "binary_size")]
    BinarySize,
    #[serde(rename = "binary_presence")]
    BinaryPresence,
    #[serde(rename = "counting")]
    Counting,
    #[serde(rename = "multichoice")]
    Multichoice,
    #[serde(rename = "regression_ego_dist")]
    RegressionEgoDist,
    #[serde(rename = "regression_obj_dist")]
    RegressionObjDist,
    #[serde(rename = "regression_center_dist")]
    RegressionCenterDist,
    #[serde(rename = "regression_size")]
    RegressionSize,
    #[serde(rename = "grounding_2d")]
    Grounding2d,
    #[serde(rename = "grounding_3d")]
    Grounding3d,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::BinaryViewpoint,
        Category::BinarySize,
        Category::BinaryPresence,
        Category::Counting,
        Category::Multichoice,
        Category::RegressionEgoDist,
        Category::RegressionObjDist,
        Category::RegressionCenterDist,
        Category::RegressionSize,
        Category::Grounding2d,
        Category::Grounding3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::BinaryViewpoint => "binary_viewpoint",
            Category::BinarySize => "binary_size",
            Category::BinaryPresence => "binary_presence",
            Category::Counting => "counting",
            Category::Multichoice => "multichoice",
            Category::RegressionEgoDist => "regression_ego_dist",
            Category::RegressionObjDist => "regression_obj_dist",
            Category::RegressionCenterDist => "regression_center_dist",
            Category::RegressionSize => "regression_size",
            Category::Grounding2d => "grounding_2d",
            Category::Grounding3d => "grounding_3d",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Category::BinaryViewpoint | Category::BinarySize | Category::BinaryPresence
        )
    }

    pub fn is_regression(self) -> bool {
        matches!(
            self,
            Category::RegressionEgoDist
                | Category::RegressionObjDist
                | Category::RegressionCenterDist
                | Category::RegressionSize
        )
    }

    /// Metric distance categories (the ones scale augmentation touches).
    pub fn is_distance(self) -> bool {
        matches!(
            self,
            Category::RegressionEgoDist | Category::RegressionObjDist | Category::RegressionCenterDist
        )
    }

    pub fn is_grounding(self) -> bool {
        matches!(self, Category::Grounding2d | Category::Grounding3d)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownCategory(s.into()))
    }
}

/// Finer question type inside a category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    LeftRight,
    FrontBehind,
    Width,
    Length,
    Height,
    Presence,
    Absence,
    Count,
    CountAbsent,
    EgoDistance,
    MinDistance,
    CenterDistance,
    Box2d,
    Box3d,
    Referring2d,
    Referring3d,
}

/// Box convention used for size and 3D box answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Obb,
    Aabb,
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "obb" => Ok(Convention::Obb),
            "aabb" => Ok(Convention::Aabb),
            other => Err(format!("unknown convention `{other}` (expected obb or aabb)")),
        }
    }
}

/// Typed ground-truth answer.
#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Binary(bool),
    Count(u32),
    Choice(char),
    /// Meters, full precision.
    Metric(f64),
    Box2d(Box2D),
    Box3d(OrientedBox3D),
}

impl Answer {
    /// Rendering used in answer text and in the `Answer:` line of CoT
    /// responses.
    pub fn text(&self) -> String {
        match self {
            Answer::Binary(true) => "Yes".into(),
            Answer::Binary(false) => "No".into(),
            Answer::Count(n) => n.to_string(),
            Answer::Choice(c) => c.to_string(),
            Answer::Metric(m) => format_meters(*m),
            Answer::Box2d(b) => format_box2d(b, 2),
            Answer::Box3d(b) => format_box3d(b),
        }
    }
}

pub fn format_meters(m: f64) -> String {
    format!("{m:.2}m")
}

pub fn format_box2d(b: &Box2D, decimals: usize) -> String {
    format!(
        "[{:.*}, {:.*}, {:.*}, {:.*}]",
        decimals, b.x_min, decimals, b.y_min, decimals, b.x_max, decimals, b.y_max
    )
}

pub fn format_box3d(b: &OrientedBox3D) -> String {
    let c = b.center();
    let d = b.dims();
    format!(
        "center [{:.3}, {:.3}, {:.3}], dims [{:.3}, {:.3}, {:.3}], yaw {:.3}",
        c.x,
        c.y,
        c.z,
        d[0],
        d[1],
        d[2],
        b.yaw()
    )
}

/// One reasoning step: an object's 2D box and the depth read inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotStep {
    pub object_id: String,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: Box2D,
    /// Meters.
    pub depth: f64,
}

impl CotStep {
    /// `Depth(<label>, [x_min, y_min, x_max, y_max]) -> <value>m`
    pub fn line(&self) -> String {
        format!("{} {}", call_text(&self.label, &self.bbox), format_meters(self.depth))
    }
}

/// The call half of a depth step, up to and including the arrow.
pub fn call_text(label: &str, b: &Box2D) -> String {
    format!("Depth({label}, {}) ->", format_box2d(b, 0))
}

/// A generated question-answer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QaRecord {
    pub record_id: String,
    pub video_id: String,
    pub frame_id: String,
    pub category: Category,
    pub kind: QuestionKind,
    pub question: String,
    pub answer: Answer,
    /// Multichoice options, letters `A`..`D` in order.
    pub choices: Option<Vec<String>>,
    /// Numeric value of each option for metric and counting multichoice.
    pub choice_values: Option<Vec<f64>>,
    /// Category the multichoice question was derived from.
    pub source_category: Option<Category>,
    pub cot_steps: Option<Vec<CotStep>>,
    pub referenced_objects: Vec<String>,
    pub referenced_labels: Vec<String>,
    pub convention: Convention,
    pub scale_factor: f64,
}

impl QaRecord {
    pub fn answer_text(&self) -> String {
        self.answer.text()
    }

    /// Full-precision metric value behind the answer, if any.
    pub fn answer_value(&self) -> Option<f64> {
        match (&self.answer, &self.choice_values) {
            (Answer::Metric(m), _) => Some(*m),
            (Answer::Choice(c), Some(values)) if self.source_category.is_some_and(Category::is_regression) => {
                values.get(choice_index(*c)?).copied()
            }
            _ => None,
        }
    }

    /// Step-by-step response: one depth line per step, then the answer.
    pub fn cot_text(&self) -> Option<String> {
        let steps = self.cot_steps.as_ref()?;
        let mut out = String::new();
        for step in steps {
            let _ = writeln!(out, "{}", step.line());
        }
        let _ = write!(out, "Answer: {}", self.answer_text());
        Some(out)
    }

    /// Question text with the lettered options appended.
    pub fn prompt_text(&self) -> String {
        match &self.choices {
            None => self.question.clone(),
            Some(choices) => {
                let mut out = self.question.clone();
                for (i, c) in choices.iter().enumerate() {
                    let _ = write!(out, "\n({}) {}", choice_letter(i), c);
                }
                out
            }
        }
    }
}

pub fn choice_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

pub fn choice_index(letter: char) -> Option<usize> {
    matches!(letter, 'A'..='D').then(|| (letter as u8 - b'A') as usize)
}

fn round2(v: f64) -> f64 {
    libm::round(v * 100.0) / 100.0
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum WireAnswer {
    Binary(bool),
    Count(u32),
    Choice(String),
    Metric { value: f64, unit: String },
    Box2d(Box2D),
    Box3d(OrientedBox3D),
}

/// JSONL layout of a [`QaRecord`].
#[derive(Serialize, Deserialize)]
pub(crate) struct WireRecord {
    record_id: String,
    video_id: String,
    frame_id: String,
    category: Category,
    kind: QuestionKind,
    question: String,
    answer: WireAnswer,
    answer_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cot_steps: Option<Vec<CotStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cot_text: Option<String>,
    referenced_objects: Vec<String>,
    #[serde(default)]
    referenced_labels: Vec<String>,
    convention: Convention,
    scale_factor: f64,
}

impl From<QaRecord> for WireRecord {
    fn from(r: QaRecord) -> Self {
        let answer_text = r.answer_text();
        let cot_text = r.cot_text();
        let answer_value = r.answer_value();
        let answer = match r.answer {
            Answer::Binary(b) => WireAnswer::Binary(b),
            Answer::Count(n) => WireAnswer::Count(n),
            Answer::Choice(c) => WireAnswer::Choice(c.to_string()),
            Answer::Metric(m) => WireAnswer::Metric {
                value: round2(m),
                unit: "m".into(),
            },
            Answer::Box2d(b) => WireAnswer::Box2d(b),
            Answer::Box3d(b) => WireAnswer::Box3d(b),
        };
        WireRecord {
            record_id: r.record_id,
            video_id: r.video_id,
            frame_id: r.frame_id,
            category: r.category,
            kind: r.kind,
            question: r.question,
            answer,
            answer_text,
            answer_value,
            choices: r.choices,
            choice_values: r.choice_values,
            source_category: r.source_category,
            cot_steps: r.cot_steps,
            cot_text,
            referenced_objects: r.referenced_objects,
            referenced_labels: r.referenced_labels,
            convention: r.convention,
            scale_factor: r.scale_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordSchemaError {
    #[error("choice answer must be a single letter A-D, got `{0}`")]
    BadChoice(String),
    #[error("unit `{0}` is not supported in stored answers (expected m)")]
    BadUnit(String),
}

impl TryFrom<WireRecord> for QaRecord {
    type Error = RecordSchemaError;

    fn try_from(w: WireRecord) -> Result<Self, Self::Error> {
        let answer = match w.answer {
            WireAnswer::Binary(b) => Answer::Binary(b),
            WireAnswer::Count(n) => Answer::Count(n),
            WireAnswer::Choice(s) => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if choice_index(c).is_some() => Answer::Choice(c),
                    _ => return Err(RecordSchemaError::BadChoice(s)),
                }
            }
            WireAnswer::Metric { value, unit } => {
                if unit != "m" {
                    return Err(RecordSchemaError::BadUnit(unit));
                }
                Answer::Metric(w.answer_value.unwrap_or(value))
            }
            WireAnswer::Box2d(b) => Answer::Box2d(b),
            WireAnswer::Box3d(b) => Answer::Box3d(b),
        };
        Ok(QaRecord {
            record_id: w.record_id,
            video_id: w.video_id,
            frame_id: w.frame_id,
            category: w.category,
            kind: w.kind,
            question: w.question,
            answer,
            choices: w.choices,
            choice_values: w.choice_values,
            source_category: w.source_category,
            cot_steps: w.cot_steps,
            referenced_objects: w.referenced_objects,
            referenced_labels: w.referenced_labels,
            convention: w.convention,
            scale_factor: w.scale_factor,
        })
    }
}

impl Serialize for QaRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireRecord::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QaRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireRecord::deserialize(d)?;
        QaRecord::try_from(wire).map_err(serde::de::Error::custom)
    }
}

/// One JSON line for `record` (no trailing newline).
pub fn to_json_line(record: &QaRecord) -> String {
    serde_json::to_string(record).expect("records always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use alloc::vec;

    fn record(answer: Answer) -> QaRecord {
        QaRecord {
            record_id: "v:f:c:0".into(),
            video_id: "v".into(),
            frame_id: "f".into(),
            category: Category::RegressionEgoDist,
            kind: QuestionKind::EgoDistance,
            question: "How far is the chair from the camera?".into(),
            answer,
            choices: None,
            choice_values: None,
            source_category: None,
            cot_steps: Some(vec![CotStep {
                object_id: "o1".into(),
                label: "chair".into(),
                bbox: Box2D::new(10.0, 20.0, 110.0, 220.0).unwrap(),
                depth: 2.0,
            }]),
            referenced_objects: vec!["o1".into()],
            referenced_labels: vec!["chair".into()],
            convention: Convention::Obb,
            scale_factor: 1.0,
        }
    }

    #[test]
    fn cot_grammar() {
        let r = record(Answer::Metric(1.3217));
        assert_eq!(
            r.cot_text().unwrap(),
            "Depth(chair, [10, 20, 110, 220]) -> 2.00m\nAnswer: 1.32m"
        );
    }

    #[test]
    fn metric_wire_keeps_full_precision_alongside_rounded() {
        let r = record(Answer::Metric(1.3217));
        let line = to_json_line(&r);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["answer"]["metric"]["value"], 1.32);
        assert_eq!(v["answer"]["metric"]["unit"], "m");
        assert_eq!(v["answer_value"], 1.3217);
        assert_eq!(v["category"], "regression_ego_dist");
        let back: QaRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn box3d_round_trips_exactly() {
        let b = OrientedBox3D::new(Vec3::new(0.1, -0.7, 3.3), [0.4, 1.1, 0.9], 0.123456789).unwrap();
        let mut r = record(Answer::Box3d(b));
        r.category = Category::Grounding3d;
        r.cot_steps = None;
        let back: QaRecord = serde_json::from_str(&to_json_line(&r)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn category_names_parse_back() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>(), Ok(c));
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
    }

    #[test]
    fn prompt_lists_choices() {
        let mut r = record(Answer::Choice('B'));
        r.category = Category::Multichoice;
        r.choices = Some(vec!["0.90m".into(), "1.00m".into(), "1.10m".into(), "1.20m".into()]);
        assert!(r.prompt_text().ends_with("(A) 0.90m\n(B) 1.00m\n(C) 1.10m\n(D) 1.20m"));
    }
}
