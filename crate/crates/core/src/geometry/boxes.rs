use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::{wrap_angle, GeometryError, Mat3, RigidPose, Vec3, MIN_BOX_EDGE};

/// Gravity-aligned 7-DOF box: center, edge lengths `(x_len, y_len, z_len)`
/// and yaw about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOrientedBox")]
pub struct OrientedBox3D {
    center: Vec3,
    dims: [f64; 3],
    yaw: f64,
}

#[derive(Deserialize)]
struct RawOrientedBox {
    center: Vec3,
    dims: [f64; 3],
    yaw: f64,
}

impl TryFrom<RawOrientedBox> for OrientedBox3D {
    type Error = GeometryError;

    fn try_from(raw: RawOrientedBox) -> Result<Self, Self::Error> {
        OrientedBox3D::new(raw.center, raw.dims, raw.yaw)
    }
}

/// Object extents as used by size questions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    /// Longer horizontal edge.
    pub width: f64,
    /// Shorter horizontal edge.
    pub length: f64,
    /// Vertical edge.
    pub height: f64,
}

impl OrientedBox3D {
    pub fn new(center: Vec3, dims: [f64; 3], yaw: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !yaw.is_finite() || dims.iter().any(|d| !d.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if dims.iter().any(|&d| d < MIN_BOX_EDGE) {
            return Err(GeometryError::DegenerateBox);
        }
        Ok(Self {
            center,
            dims,
            yaw: wrap_angle(yaw),
        })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    /// `(x_len, y_len, z_len)` in the box's local frame.
    pub fn dims(&self) -> [f64; 3] {
        self.dims
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Local-to-parent rotation.
    pub fn rotation(&self) -> Mat3 {
        Mat3::rotation_y(self.yaw)
    }

    /// The 8 corners, ordered by the sign pattern of the local offsets
    /// `(±x, ±y, ±z)` with `x` varying slowest.
    pub fn corners(&self) -> [Vec3; 8] {
        let rot = self.rotation();
        let half = [self.dims[0] * 0.5, self.dims[1] * 0.5, self.dims[2] * 0.5];
        core::array::from_fn(|i| {
            let sx = if i & 4 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 1 == 0 { -1.0 } else { 1.0 };
            self.center + rot.mul_vec(Vec3::new(sx * half[0], sy * half[1], sz * half[2]))
        })
    }

    /// Horizontal footprint corners `(x, z)` in counter-clockwise order.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let (s, c) = (libm::sin(self.yaw), libm::cos(self.yaw));
        let (hx, hz) = (self.dims[0] * 0.5, self.dims[2] * 0.5);
        let local = [(hx, hz), (-hx, hz), (-hx, -hz), (hx, -hz)];
        let mut pts = local.map(|(lx, lz)| (self.center.x + c * lx + s * lz, self.center.z - s * lx + c * lz));
        // Rotation about y maps (x, z) with a handedness flip; normalize to CCW.
        if shoelace(&pts) < 0.0 {
            pts.reverse();
        }
        pts
    }

    /// Point expressed in the box's local (unrotated, centered) frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.rotation().transpose().mul_vec(p - self.center)
    }

    /// True when `p` lies inside the box grown by `margin` on every face.
    pub fn contains_with_margin(&self, p: Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.dims[0] * 0.5 + margin
            && l.y.abs() <= self.dims[1] * 0.5 + margin
            && l.z.abs() <= self.dims[2] * 0.5 + margin
    }

    /// Vertical interval `(min_y, max_y)`.
    pub fn vertical_range(&self) -> (f64, f64) {
        let h = self.dims[1] * 0.5;
        (self.center.y - h, self.center.y + h)
    }

    /// Width / length / height: the longer and shorter horizontal edges and
    /// the vertical edge.
    pub fn object_dimensions(&self) -> Dimensions {
        let [x, y, z] = self.dims;
        Dimensions {
            width: x.max(z),
            length: x.min(z),
            height: y,
        }
    }

    /// Tightest axis-aligned box containing every corner.
    pub fn to_aabb(&self) -> AxisAlignedBox3D {
        // snap residue like cos(pi/2) = 6e-17 so right angles give exact extents
        let snap = |v: f64| if v < 1e-12 { 0.0 } else if v > 1.0 - 1e-12 { 1.0 } else { v };
        let (s, c) = (snap(libm::sin(self.yaw).abs()), snap(libm::cos(self.yaw).abs()));
        let [x, y, z] = self.dims;
        let half = Vec3::new(x * c + z * s, y, x * s + z * c) * 0.5;
        AxisAlignedBox3D {
            min: self.center - half,
            max: self.center + half,
        }
    }

    /// Re-expresses a world-space box in the camera frame of `pose`
    /// (camera-to-world).
    pub fn transform_to_camera(&self, pose: &RigidPose) -> Result<OrientedBox3D, GeometryError> {
        let heading = pose.gravity_heading()?;
        OrientedBox3D::new(
            pose.world_to_camera(self.center),
            self.dims,
            self.yaw - heading,
        )
    }

    /// Same box, uniformly scaled about the origin of its frame.
    pub fn scaled(&self, factor: f64) -> Result<OrientedBox3D, GeometryError> {
        OrientedBox3D::new(self.center * factor, self.dims.map(|d| d * factor), self.yaw)
    }
}

pub(super) fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc * 0.5
}

/// Axis-aligned 3D box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox3D {
    pub min: Vec3,
    pub max: Vec3,
}

impl AxisAlignedBox3D {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, GeometryError> {
        if !min.is_finite() || !max.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(GeometryError::InvalidAabb);
        }
        Ok(Self { min, max })
    }

    pub fn extents(&self) -> [f64; 3] {
        (self.max - self.min).to_array()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.y >= self.min.y - tol
            && p.z >= self.min.z - tol
            && p.x <= self.max.x + tol
            && p.y <= self.max.y + tol
            && p.z <= self.max.z + tol
    }

    /// The same extents as a zero-yaw oriented box.
    pub fn to_oriented(&self) -> Result<OrientedBox3D, GeometryError> {
        OrientedBox3D::new(self.center(), self.extents(), 0.0)
    }
}

/// Image-space axis-aligned box, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox2D")]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
struct RawBox2D {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<RawBox2D> for Box2D {
    type Error = GeometryError;

    fn try_from(r: RawBox2D) -> Result<Self, Self::Error> {
        Box2D::new(r.x_min, r.y_min, r.x_max, r.y_max)
    }
}

/// Pixel index ranges covered by a [`Box2D`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSpan {
    pub cols: Range<u32>,
    pub rows: Range<u32>,
}

impl PixelSpan {
    pub fn is_empty(&self) -> bool {
        self.cols.is_empty() || self.rows.is_empty()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows
            .clone()
            .flat_map(move |v| self.cols.clone().map(move |u| (u, v)))
    }
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::InvalidBox2D);
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Whole-image box for a `width` x `height` image.
    pub fn image(width: u32, height: u32) -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: width as f64,
            y_max: height as f64,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) * 0.5, (self.y_min + self.y_max) * 0.5)
    }

    pub fn intersection(&self, other: &Box2D) -> Option<Box2D> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min <= x_max && y_min <= y_max).then_some(Box2D {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Positive-area overlap with the `width` x `height` image rectangle.
    pub fn overlaps_image(&self, width: u32, height: u32) -> bool {
        self.x_min < width as f64 && self.x_max > 0.0 && self.y_min < height as f64 && self.y_max > 0.0
    }

    pub fn clamp_to_image(&self, width: u32, height: u32) -> Box2D {
        let (w, h) = (width as f64, height as f64);
        Box2D {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
        }
    }

    /// Coordinates rounded to whole pixels.
    pub fn rounded(&self) -> Box2D {
        Box2D {
            x_min: libm::round(self.x_min),
            y_min: libm::round(self.y_min),
            x_max: libm::round(self.x_max),
            y_max: libm::round(self.y_max),
        }
    }

    /// Pixels `(u, v)` whose unit cell `[u, u+1) x [v, v+1)` overlaps the box,
    /// restricted to the image.
    pub fn pixel_span(&self, width: u32, height: u32) -> PixelSpan {
        let span = |lo: f64, hi: f64, limit: u32| -> Range<u32> {
            let start = libm::floor(lo).max(0.0);
            let end = libm::ceil(hi).min(limit as f64);
            if end <= start {
                0..0
            } else {
                (start as u32)..(end as u32)
            }
        };
        PixelSpan {
            cols: span(self.x_min, self.x_max, width),
            rows: span(self.y_min, self.y_max, height),
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}
