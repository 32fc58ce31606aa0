//! Core of the spatial VQA toolkit.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (only `alloc` is required). File formats, the command line, judge
//! transports and the depth tool service live in the `svf` companion crate.
//!
//! Module map:
//!
//! - [`geometry`]: rigid poses, pinhole projection, oriented boxes, IoU kernels
//!   and point-cloud distances.
//! - [`depth`]: dense depth maps and the box-median rule shared by CoT
//!   synthesis and the depth tool.
//! - [`scene`]: scene/frame model, frame sub-sampling, visibility and
//!   support-frame selection.
//! - [`synth`]: seeded synthetic scenes with analytically ray-cast depth.
//! - [`qa`]: template QA generation for every task category.
//! - [`blind`]: text-only judge panel protocol for benchmark de-biasing.
//! - [`tool`]: parser and executor for `Depth(...)` tool calls.
//! - [`eval`]: answer parsing and the metric suite.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod blind;
pub mod depth;
pub mod eval;
pub mod geometry;
pub mod qa;
pub mod rng;
pub mod scene;
pub mod synth;
pub mod tool;

pub use depth::{DepthMap, DepthSource};
pub use eval::{evaluate, EvalReport, Prediction};
pub use qa::{Category, GenerationConfig, QaRecord};
pub use scene::{Frame, ObjectAnnotation, Scene, Split, VisibleObject};
pub use geometry::{
    AxisAlignedBox3D, Box2D, CameraIntrinsics, GeometryError, OrientedBox3D, PointCloud,
    RigidPose, Vec3,
};

