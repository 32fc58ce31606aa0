//! Seeded synthetic scenes with analytically ray-cast depth.
//!
//! Boxes stand on a ground plane at `y = 0` (world `+y` points down) and the
//! camera orbits the layout at a fixed height while looking at its center.
//! Every depth value is an exact ray/primitive intersection, so downstream
//! answers have closed-form checks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::depth::{DepthMap, DepthSource};
use crate::geometry::{
    footprint_intersection_area, CameraIntrinsics, GeometryError, Mat3, OrientedBox3D, RigidPose,
    Vec3,
};
use crate::rng::rng_for;
use crate::scene::{Frame, ObjectAnnotation, Scene, SceneError, Split};

/// Placement attempts per object before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

pub const DEFAULT_VOCABULARY: &[&str] = &[
    "chair", "table", "sofa", "lamp", "bed", "cabinet", "shelf", "desk", "plant", "television",
    "stool", "box",
];

const MATERIALS: &[&str] = &["wood", "metal", "fabric", "plastic", "glass"];
const COLORS: &[&str] = &["white", "black", "brown", "gray", "red", "blue", "green"];
const SHAPES: &[&str] = &["rectangular", "square", "round", "irregular"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("cannot place {requested} non-overlapping objects (placed {placed} after {PLACEMENT_ATTEMPTS} attempts)")]
    SpecInfeasible { requested: usize, placed: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Counts and ranges for [`generate_synthetic_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub video_id: String,
    pub objects: usize,
    pub frames: usize,
    pub fps: f64,
    /// Object footprints lie inside `[-h, h]` on both horizontal axes.
    pub room_half_extent: f64,
    /// Minimum horizontal clearance between two objects, meters.
    pub min_gap: f64,
    /// Horizontal edge lengths are drawn from this range.
    pub horizontal_size: (f64, f64),
    pub vertical_size: (f64, f64),
    pub camera_height: f64,
    /// Distance of the orbiting camera from the room center.
    pub orbit_radius: f64,
    pub degrees_per_frame: f64,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub vocabulary: Vec<String>,
    /// Also emit noisy `arkit` and `mono` depth maps.
    pub noisy_sources: bool,
    pub split: Split,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            video_id: "synth".into(),
            objects: 8,
            frames: 20,
            fps: 1.0,
            room_half_extent: 2.0,
            min_gap: 0.1,
            horizontal_size: (0.3, 1.4),
            vertical_size: (0.3, 1.6),
            camera_height: 1.4,
            orbit_radius: 5.5,
            degrees_per_frame: 9.0,
            width: 160,
            height: 120,
            focal: 120.0,
            vocabulary: DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            noisy_sources: false,
            split: Split::Train,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<(), SynthError> {
        let positive = [
            self.fps,
            self.room_half_extent,
            self.camera_height,
            self.orbit_radius,
            self.focal,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SynthError::InvalidSpec("fps, room, camera and focal values must be positive"));
        }
        if self.frames == 0 || self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidSpec("frames and image size must be nonzero"));
        }
        let (h0, h1) = self.horizontal_size;
        let (v0, v1) = self.vertical_size;
        if !(h0 > 0.0 && h0 <= h1 && v0 > 0.0 && v0 <= v1) {
            return Err(SynthError::InvalidSpec("size ranges must be positive and ordered"));
        }
        if self.orbit_radius <= self.room_half_extent * core::f64::consts::SQRT_2 {
            return Err(SynthError::InvalidSpec("camera orbit must stay outside the room"));
        }
        if self.vocabulary.is_empty() {
            return Err(SynthError::InvalidSpec("vocabulary is empty"));
        }
        Ok(())
    }
}

/// Builds a deterministic scene for `seed`.
pub fn generate_synthetic_scene(seed: u64, spec: &SynthSpec) -> Result<Scene, SynthError> {
    spec.check()?;
    let mut rng = rng_for(&[seed.into(), "synth".into(), spec.video_id.as_str().into()]);
    let objects = place_objects(&mut rng, spec)?;
    let boxes: Vec<OrientedBox3D> = objects.iter().map(|o| o.box_world).collect();
    let intrinsics = CameraIntrinsics::new(
        spec.focal,
        spec.focal,
        (spec.width / 2) as f64,
        (spec.height / 2) as f64,
        spec.width,
        spec.height,
    )?;

    let start = rng.gen_range(-PI..PI);
    let mut azimuth = start;
    let mut frames = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let radius = spec.orbit_radius + rng.gen_range(-0.3..0.3);
        let position = Vec3::new(
            radius * libm::cos(azimuth),
            -spec.camera_height,
            radius * libm::sin(azimuth),
        );
        let look_jitter = rng.gen_range(-3.0f64..3.0).to_radians();
        let heading = libm::atan2(-position.x, -position.z) + look_jitter;
        let pose = RigidPose::from_heading(heading, position)?;
        let gt = render_depth(&boxes, &intrinsics, &pose);
        let mut depth = BTreeMap::new();
        if spec.noisy_sources {
            depth.insert(DepthSource::Arkit, perturb(&gt, &mut rng, 0.02));
            depth.insert(DepthSource::Mono, perturb(&gt, &mut rng, 0.10));
        }
        depth.insert(DepthSource::Gt, gt);
        let frame_id = format!("frame_{i:04}");
        frames.push(Frame {
            image: format!("{frame_id}.jpg"),
            frame_id,
            timestamp: i as f64 / spec.fps,
            intrinsics,
            pose,
            depth,
            visible_objects: Vec::new(),
            support_frames: Vec::new(),
        });
        let step = spec.degrees_per_frame * rng.gen_range(0.8..1.2);
        azimuth += step.to_radians();
    }

    Ok(Scene::new(spec.video_id.clone(), spec.fps, spec.split, frames, objects)?)
}

fn place_objects(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Result<Vec<ObjectAnnotation>, SynthError> {
    let mut placed: Vec<ObjectAnnotation> = Vec::with_capacity(spec.objects);
    let mut grown: Vec<OrientedBox3D> = Vec::with_capacity(spec.objects);
    for i in 0..spec.objects {
        let mut attempts = 0;
        let candidate = loop {
            if attempts == PLACEMENT_ATTEMPTS {
                return Err(SynthError::SpecInfeasible {
                    requested: spec.objects,
                    placed: placed.len(),
                });
            }
            attempts += 1;
            let dims = [
                rng.gen_range(spec.horizontal_size.0..=spec.horizontal_size.1),
                rng.gen_range(spec.vertical_size.0..=spec.vertical_size.1),
                rng.gen_range(spec.horizontal_size.0..=spec.horizontal_size.1),
            ];
            let yaw = rng.gen_range(-PI..PI);
            let limit = spec.room_half_extent;
            let center = Vec3::new(
                rng.gen_range(-limit..=limit),
                -dims[1] * 0.5,
                rng.gen_range(-limit..=limit),
            );
            let b = OrientedBox3D::new(center, dims, yaw)?;
            if b.footprint().iter().any(|(x, z)| x.abs() > limit || z.abs() > limit) {
                continue;
            }
            let g = grow(&b, spec.min_gap * 0.5)?;
            if grown.iter().all(|other| footprint_intersection_area(&g, other) <= 0.0) {
                grown.push(g);
                break b;
            }
        };
        let pick = |rng: &mut ChaCha8Rng, list: &[&str]| list[rng.gen_range(0..list.len())].to_string();
        let label = spec.vocabulary[rng.gen_range(0..spec.vocabulary.len())].clone();
        placed.push(ObjectAnnotation {
            object_id: format!("obj_{i:03}"),
            label,
            material: Some(pick(rng, MATERIALS)),
            color: Some(pick(rng, COLORS)),
            shape: Some(pick(rng, SHAPES)),
            box_world: candidate,
        });
    }
    Ok(placed)
}

fn grow(b: &OrientedBox3D, margin: f64) -> Result<OrientedBox3D, GeometryError> {
    let d = b.dims();
    OrientedBox3D::new(b.center(), [d[0] + 2.0 * margin, d[1], d[2] + 2.0 * margin], b.yaw())
}

fn perturb(gt: &DepthMap, rng: &mut ChaCha8Rng, amplitude: f64) -> DepthMap {
    let values = gt
        .values()
        .iter()
        .map(|&z| {
            let noise = rng.gen_range(-amplitude..amplitude);
            if z > 0.0 {
                (z as f64 * (1.0 + noise)) as f32
            } else {
                z
            }
        })
        .collect();
    DepthMap::new(gt.width(), gt.height(), values).expect("same dimensions")
}

/// Ray parameter of the first hit of `origin + t * dir` with `b`, `t > 0`.
pub fn ray_box_hit(origin: Vec3, dir: Vec3, b: &OrientedBox3D) -> Option<f64> {
    LocalBox::new(b).hit(origin, dir)
}

/// A box with its inverse rotation precomputed for repeated ray queries.
struct LocalBox {
    center: Vec3,
    to_local: Mat3,
    half: [f64; 3],
}

impl LocalBox {
    fn new(b: &OrientedBox3D) -> Self {
        Self {
            center: b.center(),
            to_local: b.rotation().transpose(),
            half: b.dims().map(|v| v * 0.5),
        }
    }

    fn hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let o = self.to_local.mul_vec(origin - self.center);
        let d = self.to_local.mul_vec(dir);
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for ((oi, di), hi) in o.to_array().into_iter().zip(d.to_array()).zip(self.half) {
            if di.abs() < 1e-15 {
                if oi.abs() > hi {
                    return None;
                }
                continue;
            }
            let (a, c) = ((-hi - oi) / di, (hi - oi) / di);
            t_near = t_near.max(a.min(c));
            t_far = t_far.min(a.max(c));
        }
        (t_far >= t_near && t_near > 0.0).then_some(t_near)
    }
}

/// Ray parameter of the hit with the ground plane `y = 0`.
pub fn ray_floor_hit(origin: Vec3, dir: Vec3) -> Option<f64> {
    if dir.y <= 1e-12 {
        return None;
    }
    let t = -origin.y / dir.y;
    (t > 0.0).then_some(t)
}

/// Z-buffer of `boxes` plus the ground plane for one camera. Pixels that see
/// nothing are `0` (invalid).
pub fn render_depth(boxes: &[OrientedBox3D], k: &CameraIntrinsics, pose: &RigidPose) -> DepthMap {
    let origin = pose.translation();
    let locals: Vec<LocalBox> = boxes.iter().map(LocalBox::new).collect();
    let mut values = Vec::with_capacity(k.width as usize * k.height as usize);
    for v in 0..k.height {
        for u in 0..k.width {
            // camera ray has unit z, so the ray parameter is the z-depth
            let dir = pose.rotation().mul_vec(k.ray(u as f64, v as f64));
            let hit = locals
                .iter()
                .filter_map(|b| b.hit(origin, dir))
                .chain(ray_floor_hit(origin, dir))
                .fold(f64::INFINITY, f64::min);
            values.push(if hit.is_finite() { hit as f32 } else { 0.0 });
        }
    }
    DepthMap::new(k.width, k.height, values).expect("sized from intrinsics")
}
