//! Scene and frame model with the per-frame preprocessing steps: frame
//! sub-sampling, visibility and multi-view support-frame selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::{DepthMap, DepthSource};
use crate::geometry::{
    project_box_to_2d, rotation_angle_between, Box2D, CameraIntrinsics, GeometryError,
    OrientedBox3D, RigidPose, MIN_PROJECTION_DEPTH,
};

/// Rotation that triggers a new support frame, in degrees.
pub const SUPPORT_TRIGGER_DEGREES: f64 = 15.0;
/// Translation that triggers a new support frame, in meters.
pub const SUPPORT_TRIGGER_METERS: f64 = 0.30;
pub const MAX_SUPPORT_FRAMES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("target fps {target} must be in (0, {native}]")]
    InvalidTargetFps { target: f64, native: f64 },
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("object `{0}` has an empty label")]
    EmptyLabel(String),
    #[error("duplicate frame id `{0}`")]
    DuplicateFrame(String),
    #[error("frame `{0}` does not have a strictly increasing timestamp")]
    NonMonotonicTimestamps(String),
    #[error("frame `{frame_id}`: {depth_source} depth map is {depth_width}x{depth_height}, intrinsics are {width}x{height}")]
    IntrinsicsMismatch {
        frame_id: String,
        depth_source: DepthSource,
        depth_width: u32,
        depth_height: u32,
        width: u32,
        height: u32,
    },
    #[error("frame `{frame_id}`: {error}")]
    Geometry { frame_id: String, error: GeometryError },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// One annotated object in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub object_id: String,
    pub label: String,
    #[serde(default)]
    pub material: Option<String>,
    #[serde(default)]
    pub color: Option<String>,
    #[serde(default)]
    pub shape: Option<String>,
    pub box_world: OrientedBox3D,
}

/// An object seen from a frame: amodal camera-space box plus its projected,
/// image-clipped 2D box.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleObject {
    pub object_id: String,
    pub box_camera: OrientedBox3D,
    pub box2d: Box2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    pub timestamp: f64,
    /// Opaque reference to the RGB image.
    pub image: String,
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world.
    pub pose: RigidPose,
    pub depth: BTreeMap<DepthSource, DepthMap>,
    pub visible_objects: Vec<VisibleObject>,
    /// Up to four earlier frames, oldest first.
    pub support_frames: Vec<String>,
}

impl Frame {
    pub fn depth(&self, source: DepthSource) -> Option<&DepthMap> {
        self.depth.get(&source)
    }

    pub fn visible(&self, object_id: &str) -> Option<&VisibleObject> {
        self.visible_objects.iter().find(|v| v.object_id == object_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub video_id: String,
    pub fps: f64,
    pub split: Split,
    pub frames: Vec<Frame>,
    pub objects: Vec<ObjectAnnotation>,
}

impl Scene {
    /// Validates the raw capture and fills in visibility and support frames.
    pub fn new(
        video_id: String,
        fps: f64,
        split: Split,
        frames: Vec<Frame>,
        objects: Vec<ObjectAnnotation>,
    ) -> Result<Self, SceneError> {
        let mut scene = Scene {
            video_id,
            fps,
            split,
            frames,
            objects,
        };
        scene.validate()?;
        scene.annotate();
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SceneError::InvalidFps(self.fps));
        }
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.object_id.as_str()) {
                return Err(SceneError::DuplicateObject(o.object_id.clone()));
            }
            if o.label.trim().is_empty() {
                return Err(SceneError::EmptyLabel(o.object_id.clone()));
            }
        }
        let mut frame_ids = BTreeSet::new();
        let mut last_time = f64::NEG_INFINITY;
        for f in &self.frames {
            if !frame_ids.insert(f.frame_id.as_str()) {
                return Err(SceneError::DuplicateFrame(f.frame_id.clone()));
            }
            if !(f.timestamp > last_time) {
                return Err(SceneError::NonMonotonicTimestamps(f.frame_id.clone()));
            }
            last_time = f.timestamp;
            for (source, map) in &f.depth {
                if map.width() != f.intrinsics.width || map.height() != f.intrinsics.height {
                    return Err(SceneError::IntrinsicsMismatch {
                        frame_id: f.frame_id.clone(),
                        depth_source: *source,
                        depth_width: map.width(),
                        depth_height: map.height(),
                        width: f.intrinsics.width,
                        height: f.intrinsics.height,
                    });
                }
            }
            f.pose.gravity_heading().map_err(|error| SceneError::Geometry {
                frame_id: f.frame_id.clone(),
                error,
            })?;
        }
        Ok(())
    }

    /// Recomputes every frame's visible objects and support frames.
    pub fn annotate(&mut self) {
        let visibility: Vec<Vec<VisibleObject>> =
            self.frames.iter().map(|f| compute_visibility(self, f)).collect();
        for (frame, visible) in self.frames.iter_mut().zip(visibility) {
            frame.visible_objects = visible;
        }
        let support: Vec<Vec<String>> = (0..self.frames.len())
            .map(|i| select_support_frames(self, i, MAX_SUPPORT_FRAMES))
            .collect();
        for (frame, ids) in self.frames.iter_mut().zip(support) {
            frame.support_frames = ids;
        }
    }

    pub fn frame(&self, frame_id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn frame_index(&self, frame_id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.frame_id == frame_id)
    }

    pub fn object(&self, object_id: &str) -> Option<&ObjectAnnotation> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    /// Every distinct label in the scene, sorted.
    pub fn labels(&self) -> BTreeSet<String> {
        self.objects.iter().map(|o| o.label.clone()).collect()
    }
}

/// Keeps frames spaced at least `1 / target_fps` seconds apart, greedily
/// from the first frame.
pub fn subsample_frames(scene: &Scene, target_fps: f64) -> Result<Scene, SceneError> {
    if !(target_fps.is_finite() && target_fps > 0.0 && target_fps <= scene.fps * (1.0 + 1e-9)) {
        return Err(SceneError::InvalidTargetFps {
            target: target_fps,
            native: scene.fps,
        });
    }
    let period = 1.0 / target_fps;
    // absorbs timestamp rounding such as 30 / 30 fps != 1.0 s exactly
    let slack = 1e-6 * period;
    let mut kept = Vec::new();
    let mut last: Option<f64> = None;
    for f in &scene.frames {
        if last.is_none_or(|t| f.timestamp - t >= period - slack) {
            last = Some(f.timestamp);
            kept.push(f.clone());
        }
    }
    Ok(Scene {
        frames: kept,
        ..scene.clone_without_frames()
    })
}

impl Scene {
    fn clone_without_frames(&self) -> Scene {
        Scene {
            video_id: self.video_id.clone(),
            fps: self.fps,
            split: self.split,
            frames: Vec::new(),
            objects: self.objects.clone(),
        }
    }
}

/// Objects with at least one corner in front of the camera whose unclipped
/// projected hull overlaps the image.
pub fn compute_visibility(scene: &Scene, frame: &Frame) -> Vec<VisibleObject> {
    let k = &frame.intrinsics;
    scene
        .objects
        .iter()
        .filter_map(|o| {
            let box_camera = o.box_world.transform_to_camera(&frame.pose).ok()?;
            if box_camera.corners().iter().all(|c| c.z <= MIN_PROJECTION_DEPTH) {
                return None;
            }
            let hull = project_box_to_2d(&box_camera, k, false).ok()?;
            if !hull.overlaps_image(k.width, k.height) {
                return None;
            }
            Some(VisibleObject {
                object_id: o.object_id.clone(),
                box_camera,
                box2d: hull.clamp_to_image(k.width, k.height),
            })
        })
        .collect()
}

/// True when two camera poses differ enough to start a new key frame.
pub fn is_support_trigger(key: &RigidPose, candidate: &RigidPose) -> bool {
    let angle = rotation_angle_between(key.rotation(), candidate.rotation());
    let moved = key.translation().distance(candidate.translation());
    angle >= SUPPORT_TRIGGER_DEGREES.to_radians() || moved >= SUPPORT_TRIGGER_METERS
}

/// Walks backwards from `reference`, chaining key frames; returns up to
/// `max_n` frame ids, oldest first.
pub fn select_support_frames(scene: &Scene, reference: usize, max_n: usize) -> Vec<String> {
    let mut key = &scene.frames[reference].pose;
    let mut picked = Vec::new();
    for frame in scene.frames[..reference].iter().rev() {
        if picked.len() >= max_n {
            break;
        }
        if is_support_trigger(key, &frame.pose) {
            picked.push(frame.frame_id.clone());
            key = &frame.pose;
        }
    }
    picked.reverse();
    picked
}

/// Pose of the `support` camera expressed in the `reference` camera frame.
pub fn relative_pose(reference: &Frame, support: &Frame) -> RigidPose {
    reference.pose.inverse().compose(&support.pose)
}
