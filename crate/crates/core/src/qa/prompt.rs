use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::generate::QaError;
use super::record::QaRecord;
use crate::geometry::{CameraIntrinsics, RigidPose};
use crate::scene::{relative_pose, Frame, Scene};

/// Per-view camera context serialized into the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewContext {
    pub intrinsics: CameraIntrinsics,
    /// Row-major 3x4 `[R|t]` of the view in the reference camera frame.
    pub relative_pose: Vec<f64>,
}

impl ViewContext {
    pub fn new(reference: &Frame, view: &Frame) -> Self {
        ViewContext {
            intrinsics: view.intrinsics,
            relative_pose: relative_pose(reference, view).to_row_major_3x4().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("view context serializes")
    }

    pub fn pose(&self) -> Result<RigidPose, crate::GeometryError> {
        RigidPose::from_row_major_3x4(&self.relative_pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum PromptSegment {
    Image(String),
    Text(String),
}

/// Interleaved image references and text for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiviewPrompt {
    pub segments: Vec<PromptSegment>,
}

impl MultiviewPrompt {
    pub fn images(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                PromptSegment::Image(i) => Some(i.as_str()),
                PromptSegment::Text(_) => None,
            })
            .collect()
    }

    /// Flattened text with an `<image>` placeholder per image.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self
            .segments
            .iter()
            .map(|s| match s {
                PromptSegment::Image(_) => "<image>",
                PromptSegment::Text(t) => t.as_str(),
            })
            .collect();
        parts.join("\n")
    }
}

/// Support views (oldest first), each as image + camera JSON, then the
/// reference view, then the question. Without support frames the prompt is
/// just the reference image and the question.
pub fn assemble_multiview_prompt(record: &QaRecord, scene: &Scene) -> Result<MultiviewPrompt, QaError> {
    let reference = scene
        .frame(&record.frame_id)
        .ok_or_else(|| QaError::UnknownFrame(record.frame_id.clone()))?;
    let mut segments = Vec::new();
    for id in &reference.support_frames {
        let support = scene
            .frame(id)
            .ok_or_else(|| QaError::UnknownFrame(id.clone()))?;
        segments.push(PromptSegment::Image(support.image.clone()));
        segments.push(PromptSegment::Text(ViewContext::new(reference, support).to_json()));
    }
    segments.push(PromptSegment::Image(reference.image.clone()));
    if !reference.support_frames.is_empty() {
        segments.push(PromptSegment::Text(ViewContext::new(reference, reference).to_json()));
    }
    segments.push(PromptSegment::Text(record.prompt_text()));
    Ok(MultiviewPrompt { segments })
}
