//! Geometric primitives and kernels.
//!
//! Conventions used throughout the crate:
//!
//! - Camera space: `+z` forward, `+x` right, `+y` down (matching image rows).
//! - World space is gravity aligned with `+y` pointing down, so "up" is `-y`.
//! - Poses are stored camera-to-world.
//! - Oriented boxes carry a yaw about the vertical (`y`) axis only.

mod boxes;
mod camera;
mod cloud;
mod iou;
mod pose;
mod vector;

pub use boxes::{AxisAlignedBox3D, Box2D, Dimensions, OrientedBox3D, PixelSpan};
pub use camera::{backproject_depth, project_box_to_2d, project_point, CameraIntrinsics};
pub use cloud::{
    center_distance, egocentric_distance, min_cloud_distance, PointCloud,
    EXACT_PAIR_LIMIT,
};
pub use iou::{footprint_intersection_area, iou_2d, iou_3d_yaw};
pub use pose::{world_to_camera, Mat3, RigidPose};
pub use vector::Vec3;

use thiserror::Error;

/// Minimum box edge length, in meters.
pub const MIN_BOX_EDGE: f64 = 1e-6;

/// Points with camera-space depth at or below this are not projectable.
pub const MIN_PROJECTION_DEPTH: f64 = 1e-6;

/// Tolerance on the gravity axis when transforming boxes between frames.
pub const GRAVITY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("rotation is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("degenerate box: every edge must be at least {MIN_BOX_EDGE} m")]
    DegenerateBox,
    #[error("invalid 2d box: min corner exceeds max corner")]
    InvalidBox2D,
    #[error("axis-aligned box min exceeds max")]
    InvalidAabb,
    #[error("pose does not preserve the gravity axis")]
    NonGravityAlignedPose,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("all box corners are behind the camera")]
    FullyBehindCamera,
    #[error("depth map is {depth_width}x{depth_height} but intrinsics are {width}x{height}")]
    DimensionMismatch {
        depth_width: u32,
        depth_height: u32,
        width: u32,
        height: u32,
    },
    #[error("no valid depth pixel inside the region")]
    EmptyRegion,
    #[error("point cloud is empty")]
    EmptyCloud,
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    use core::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * libm::floor((angle + PI) / two_pi);
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle_between(a: &Mat3, b: &Mat3) -> f64 {
    let rel = a.transpose().mul(b);
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    libm::acos(cos)
}
