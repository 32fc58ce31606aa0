use alloc::vec::Vec;

use super::boxes::shoelace;
use super::{Box2D, OrientedBox3D};

/// Intersection-over-union of two image boxes; 0 when the union is empty.
pub fn iou_2d(a: &Box2D, b: &Box2D) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| i.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Area shared by the horizontal footprints of two yaw-rotated boxes.
pub fn footprint_intersection_area(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let clipped = clip_convex(&a.footprint(), &b.footprint());
    if clipped.len() < 3 {
        return 0.0;
    }
    shoelace(&clipped).abs()
}

/// 3D IoU of two gravity-aligned boxes in the same frame: footprint polygon
/// intersection times vertical overlap.
pub fn iou_3d_yaw(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let (a_lo, a_hi) = a.vertical_range();
    let (b_lo, b_hi) = b.vertical_range();
    let vertical = a_hi.min(b_hi) - a_lo.max(b_lo);
    if vertical <= 0.0 {
        return 0.0;
    }
    let inter = footprint_intersection_area(a, b) * vertical;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Sutherland-Hodgman clipping of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut output: Vec<(f64, f64)> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let edge_start = clip[i];
        let edge_end = clip[(i + 1) % clip.len()];
        let side = |p: (f64, f64)| {
            (edge_end.0 - edge_start.0) * (p.1 - edge_start.1)
                - (edge_end.1 - edge_start.1) * (p.0 - edge_start.0)
        };
        let input = core::mem::take(&mut output);
        for j in 0..input.len() {
            let current = input[j];
            let previous = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(current), side(previous));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(crossing(previous, current, sp, sc));
                }
                output.push(current);
            } else if sp >= 0.0 {
                output.push(crossing(previous, current, sp, sc));
            }
        }
    }
    output
}

fn crossing(p: (f64, f64), q: (f64, f64), sp: f64, sq: f64) -> (f64, f64) {
    let t = sp / (sp - sq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use core::f64::consts::FRAC_PI_4;

    fn b2(x0: f64, y0: f64, x1: f64, y1: f64) -> Box2D {
        Box2D::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_2d_examples() {
        let a = b2(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou_2d(&a, &a), 1.0);
        assert_eq!(iou_2d(&a, &b2(2.0, 2.0, 3.0, 3.0)), 0.0);
        assert!((iou_2d(&a, &b2(0.5, 0.0, 1.5, 1.0)) - 1.0 / 3.0).abs() < 1e-12);
        let point = b2(1.0, 1.0, 1.0, 1.0);
        assert_eq!(iou_2d(&point, &point), 0.0);
    }

    #[test]
    fn rotated_unit_cube() {
        let a = OrientedBox3D::new(Vec3::ZERO, [1.0; 3], 0.0).unwrap();
        let b = OrientedBox3D::new(Vec3::ZERO, [1.0; 3], FRAC_PI_4).unwrap();
        let area = footprint_intersection_area(&a, &b);
        let expected_area = 2.0 * (core::f64::consts::SQRT_2 - 1.0);
        assert!((area - expected_area).abs() < 1e-12);
        let expected = expected_area / (2.0 - expected_area);
        assert!((iou_3d_yaw(&a, &b) - expected).abs() < 1e-12);
        assert!((iou_3d_yaw(&a, &b) - 0.7071).abs() < 1e-3);
    }

    #[test]
    fn vertically_disjoint() {
        let a = OrientedBox3D::new(Vec3::ZERO, [1.0; 3], 0.0).unwrap();
        let b = OrientedBox3D::new(Vec3::new(0.0, 2.0, 0.0), [1.0; 3], 0.0).unwrap();
        assert_eq!(iou_3d_yaw(&a, &b), 0.0);
    }

    #[test]
    fn identical_boxes_score_one() {
        let a = OrientedBox3D::new(Vec3::new(1.0, 2.0, 3.0), [0.3, 0.8, 1.4], 0.9).unwrap();
        assert_eq!(iou_3d_yaw(&a, &a), 1.0);
        let shifted = OrientedBox3D::new(Vec3::new(1.0, 2.0, 3.0), [0.3, 0.8, 1.4], 0.9 + 1e-9).unwrap();
        assert!((iou_3d_yaw(&a, &shifted) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contained_box() {
        let outer = OrientedBox3D::new(Vec3::ZERO, [2.0; 3], 0.3).unwrap();
        let inner = OrientedBox3D::new(Vec3::ZERO, [1.0; 3], 0.3).unwrap();
        assert!((iou_3d_yaw(&outer, &inner) - 1.0 / 8.0).abs() < 1e-12);
    }
}
