use serde::{Deserialize, Serialize};

use super::{Box2D, GeometryError, OrientedBox3D, PointCloud, Vec3, MIN_PROJECTION_DEPTH};
use crate::depth::DepthMap;

/// Pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be positive"));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Camera-space ray through pixel `(u, v)` with unit `z` component.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Projects a camera-space point to pixel coordinates.
pub fn project_point(p: Vec3, k: &CameraIntrinsics) -> Result<(f64, f64), GeometryError> {
    if p.z <= MIN_PROJECTION_DEPTH {
        return Err(GeometryError::BehindCamera);
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// 2D hull of the projected corners of a camera-space box. Corners behind
/// the camera are dropped. With `clip` the hull is clamped to the image.
pub fn project_box_to_2d(
    b: &OrientedBox3D,
    k: &CameraIntrinsics,
    clip: bool,
) -> Result<Box2D, GeometryError> {
    let mut hull: Option<Box2D> = None;
    for corner in b.corners() {
        let Ok((u, v)) = project_point(corner, k) else {
            continue;
        };
        hull = Some(match hull {
            None => Box2D {
                x_min: u,
                y_min: v,
                x_max: u,
                y_max: v,
            },
            Some(h) => Box2D {
                x_min: h.x_min.min(u),
                y_min: h.y_min.min(v),
                x_max: h.x_max.max(u),
                y_max: h.y_max.max(v),
            },
        });
    }
    let hull = hull.ok_or(GeometryError::FullyBehindCamera)?;
    Ok(if clip {
        hull.clamp_to_image(k.width, k.height)
    } else {
        hull
    })
}

/// Lifts the valid pixels of `depth` inside `region` (whole image when
/// `None`) to camera-space points. Pixel `(u, v)` sits at integer coordinates.
pub fn backproject_depth(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    region: Option<&Box2D>,
) -> Result<PointCloud, GeometryError> {
    check_dims(depth, k)?;
    let region = region.copied().unwrap_or_else(|| Box2D::image(k.width, k.height));
    let span = region.pixel_span(k.width, k.height);
    let points: alloc::vec::Vec<Vec3> = span
        .pixels()
        .filter_map(|(u, v)| {
            let z = depth.valid_at(u, v)?;
            Some(k.ray(u as f64, v as f64) * z)
        })
        .collect();
    PointCloud::new(points).map_err(|_| GeometryError::EmptyRegion)
}

pub(crate) fn check_dims(depth: &DepthMap, k: &CameraIntrinsics) -> Result<(), GeometryError> {
    if depth.width() != k.width || depth.height() != k.height {
        return Err(GeometryError::DimensionMismatch {
            depth_width: depth.width(),
            depth_height: depth.height(),
            width: k.width,
            height: k.height,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn projection_examples() {
        let k = k100();
        assert_eq!(project_point(Vec3::new(0.0, 0.0, 2.0), &k), Ok((50.0, 50.0)));
        assert_eq!(project_point(Vec3::new(1.0, 0.0, 2.0), &k), Ok((100.0, 50.0)));
        assert_eq!(
            project_point(Vec3::new(0.0, 0.0, -1.0), &k),
            Err(GeometryError::BehindCamera)
        );
    }

    #[test]
    fn unit_cube_hull_matches_corner_projection() {
        let k = k100();
        let cube = OrientedBox3D::new(Vec3::new(0.0, 0.0, 5.0), [1.0; 3], 0.0).unwrap();
        let hull = project_box_to_2d(&cube, &k, false).unwrap();
        let projected: Vec<(f64, f64)> = cube
            .corners()
            .iter()
            .map(|c| project_point(*c, &k).unwrap())
            .collect();
        let min_u = projected.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_u = projected.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_v = projected.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_v = projected.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(hull.to_array(), [min_u, min_v, max_u, max_v]);
        // near face at z=4.5: 100 * 0.5 / 4.5 + 50
        assert!((hull.x_max - (50.0 + 100.0 * 0.5 / 4.5)).abs() < 1e-12);
    }

    #[test]
    fn box_behind_camera() {
        let b = OrientedBox3D::new(Vec3::new(0.0, 0.0, -5.0), [1.0; 3], 0.0).unwrap();
        assert_eq!(project_box_to_2d(&b, &k100(), false), Err(GeometryError::FullyBehindCamera));
    }

    #[test]
    fn clip_clamps_to_image() {
        let b = OrientedBox3D::new(Vec3::new(0.0, 0.0, 1.0), [4.0, 4.0, 0.5], 0.0).unwrap();
        let k = k100();
        let raw = project_box_to_2d(&b, &k, false).unwrap();
        assert!(raw.x_min < 0.0 && raw.x_max > 100.0);
        let clipped = project_box_to_2d(&b, &k, true).unwrap();
        assert_eq!(clipped.to_array(), [0.0, 0.0, 100.0, 100.0]);
    }

    #[test]
    fn backprojection_principal_pixel() {
        let k = k100();
        let d = DepthMap::filled(100, 100, 2.0);
        let cloud = backproject_depth(&d, &k, None).unwrap();
        assert!(cloud.points().contains(&Vec3::new(0.0, 0.0, 2.0)));
        assert_eq!(cloud.len(), 100 * 100);
    }

    #[test]
    fn backprojection_two_by_two() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 2, 2).unwrap();
        let d = DepthMap::filled(2, 2, 1.0);
        let cloud = backproject_depth(&d, &k, None).unwrap();
        assert_eq!(
            cloud.points(),
            &[
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 0.0, 1.0),
                Vec3::new(0.0, 1.0, 1.0),
                Vec3::new(1.0, 1.0, 1.0)
            ]
        );
    }

    #[test]
    fn backprojection_errors() {
        let k = k100();
        let invalid = DepthMap::new(100, 100, vec![0.0; 100 * 100]).unwrap();
        assert_eq!(backproject_depth(&invalid, &k, None), Err(GeometryError::EmptyRegion));
        let small = DepthMap::filled(10, 10, 1.0);
        assert!(matches!(
            backproject_depth(&small, &k, None),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backproject_then_project_round_trip() {
        let k = CameraIntrinsics::new(140.0, 135.0, 79.5, 61.25, 160, 120).unwrap();
        let values: Vec<f32> = (0..160 * 120).map(|i| 0.5 + (i % 97) as f32 * 0.07).collect();
        let d = DepthMap::new(160, 120, values).unwrap();
        let cloud = backproject_depth(&d, &k, None).unwrap();
        for (i, p) in cloud.points().iter().enumerate() {
            let (u, v) = project_point(*p, &k).unwrap();
            assert!((u - (i % 160) as f64).abs() < 1e-4);
            assert!((v - (i / 160) as f64).abs() < 1e-4);
        }
    }
}
