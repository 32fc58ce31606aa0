use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3, GRAVITY_TOLERANCE};

const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rotation by `angle` radians about the `y` axis.
    pub fn rotation_y(angle: f64) -> Mat3 {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    /// Rotation by `angle` radians about the `x` axis.
    pub fn rotation_x(angle: f64) -> Mat3 {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn is_rotation(&self) -> bool {
        if self.0.iter().flatten().any(|v| !v.is_finite()) {
            return false;
        }
        let gram = self.transpose().mul(self);
        let orthonormal = (0..3).all(|i| {
            (0..3).all(|j| {
                let expected = if i == j { 1.0 } else { 0.0 };
                (gram.0[i][j] - expected).abs() <= ORTHONORMAL_TOLERANCE
            })
        });
        orthonormal && (self.determinant() - 1.0).abs() <= ORTHONORMAL_TOLERANCE
    }
}

/// Rigid transform stored camera-to-world: `p_world = R * p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RigidPose {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidPose {
    pub const IDENTITY: RigidPose = RigidPose {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !translation.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if !rotation.is_rotation() {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Camera at `position` turned by `heading` radians about the vertical axis.
    pub fn from_heading(heading: f64, position: Vec3) -> Result<Self, GeometryError> {
        Self::new(Mat3::rotation_y(heading), position)
    }

    /// Parses the row-major `[R|t]` layout (12 numbers).
    pub fn from_row_major_3x4(values: &[f64]) -> Result<Self, GeometryError> {
        if values.len() != 12 {
            return Err(GeometryError::InvalidRotation);
        }
        let row = |r: usize| [values[4 * r], values[4 * r + 1], values[4 * r + 2]];
        let rotation = Mat3([row(0), row(1), row(2)]);
        let translation = Vec3::new(values[3], values[7], values[11]);
        Self::new(rotation, translation)
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation.0;
        let t = self.translation;
        [
            r[0][0], r[0][1], r[0][2], t.x, r[1][0], r[1][1], r[1][2], t.y, r[2][0], r[2][1],
            r[2][2], t.z,
        ]
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// Camera-space point to world space.
    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// World-space point to camera space: `R^T (p - t)`.
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose().mul_vec(p - self.translation)
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation.mul(&other.rotation),
            translation: self.rotation.mul_vec(other.translation) + self.translation,
        }
    }

    /// Heading of the camera about the vertical axis, if the rotation keeps
    /// the camera's `y` axis on the world's `y` axis.
    pub fn gravity_heading(&self) -> Result<f64, GeometryError> {
        let up = self.rotation.column(1);
        let row = Vec3::new(self.rotation.0[1][0], self.rotation.0[1][1], self.rotation.0[1][2]);
        let off = (up - Vec3::new(0.0, 1.0, 0.0)).norm().max((row - Vec3::new(0.0, 1.0, 0.0)).norm());
        if off > GRAVITY_TOLERANCE {
            return Err(GeometryError::NonGravityAlignedPose);
        }
        Ok(libm::atan2(self.rotation.0[0][2], self.rotation.0[0][0]))
    }
}

impl TryFrom<Vec<f64>> for RigidPose {
    type Error = GeometryError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_row_major_3x4(&values)
    }
}

impl From<RigidPose> for Vec<f64> {
    fn from(p: RigidPose) -> Self {
        p.to_row_major_3x4().to_vec()
    }
}

/// World point to camera space for a camera-to-world pose.
pub fn world_to_camera(p: Vec3, pose: &RigidPose) -> Vec3 {
    pose.world_to_camera(p)
}
