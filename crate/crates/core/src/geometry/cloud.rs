use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{GeometryError, OrientedBox3D, Vec3};

/// Above this many point pairs, [`min_cloud_distance`] switches from the
/// exhaustive scan to a uniform grid over the second cloud.
pub const EXACT_PAIR_LIMIT: u64 = 10_000 * 10_000;

/// Camera-space point cloud, never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, p| acc + *p);
        sum / self.points.len() as f64
    }

    /// Largest distance from the centroid to any point.
    pub fn radius(&self) -> f64 {
        let c = self.centroid();
        self.points.iter().map(|p| p.distance(c)).fold(0.0, f64::max)
    }

    /// Keeps the points that fall inside `b` grown by `margin`.
    pub fn retain_inside(self, b: &OrientedBox3D, margin: f64) -> Result<Self, GeometryError> {
        let points = self
            .points
            .into_iter()
            .filter(|p| b.contains_with_margin(*p, margin))
            .collect();
        Self::new(points)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| *p * factor).collect(),
        }
    }
}

/// Distance from the camera origin to the closest point.
pub fn egocentric_distance(cloud: &PointCloud) -> f64 {
    cloud
        .points()
        .iter()
        .map(|p| p.norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn center_distance(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    a.center().distance(b.center())
}

/// Smallest Euclidean distance between a point of `a` and a point of `b`.
pub fn min_cloud_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    let pairs = a.len() as u64 * b.len() as u64;
    if pairs <= EXACT_PAIR_LIMIT {
        exhaustive_min_distance(a.points(), b.points())
    } else {
        GridIndex::build(b.points()).min_distance(a.points())
    }
}

fn exhaustive_min_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let d = p.distance(*q);
            if d < best {
                best = d;
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
    }
    best
}

type Cell = (i64, i64, i64);

/// Uniform hash grid for exact nearest-point queries.
struct GridIndex<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    cells: BTreeMap<Cell, Vec<usize>>,
    /// Largest occupied key along each axis; keys start at 0.
    key_max: Cell,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [Vec3]) -> Self {
        let lo = points.iter().fold(points[0], |acc, p| acc.min(*p));
        let hi = points.iter().fold(points[0], |acc, p| acc.max(*p));
        let extent = hi - lo;
        let longest = extent.x.max(extent.y).max(extent.z);
        let per_axis = libm::cbrt(points.len() as f64).max(1.0);
        let cell = (longest / per_axis).max(1e-9);
        let mut cells: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
        let mut key_max = (0, 0, 0);
        for (i, p) in points.iter().enumerate() {
            let k = Self::key_of(*p, lo, cell);
            key_max = (key_max.0.max(k.0), key_max.1.max(k.1), key_max.2.max(k.2));
            cells.entry(k).or_default().push(i);
        }
        Self {
            points,
            origin: lo,
            cell,
            cells,
            key_max,
        }
    }

    fn key_of(p: Vec3, origin: Vec3, cell: f64) -> Cell {
        let r = (p - origin) / cell;
        (
            libm::floor(r.x) as i64,
            libm::floor(r.y) as i64,
            libm::floor(r.z) as i64,
        )
    }

    fn min_distance(&self, queries: &[Vec3]) -> f64 {
        let mut best = f64::INFINITY;
        for q in queries {
            let d = self.nearest(*q, best);
            if d < best {
                best = d;
                if best == 0.0 {
                    break;
                }
            }
        }
        best
    }

    /// Nearest distance from `q`, or `bound` if nothing is closer than it.
    fn nearest(&self, q: Vec3, bound: f64) -> f64 {
        let c = Self::key_of(q, self.origin, self.cell);
        let gap = |k: i64, max: i64| if k < 0 { -k } else if k > max { k - max } else { 0 };
        let first = gap(c.0, self.key_max.0)
            .max(gap(c.1, self.key_max.1))
            .max(gap(c.2, self.key_max.2));
        let last = first + self.key_max.0.max(self.key_max.1).max(self.key_max.2) + 1;
        let mut best = bound;
        for ring in first..=last {
            // Any point in ring r (Chebyshev cell distance) is at least
            // (r - 1) cells away from the query.
            if (ring - 1) as f64 * self.cell > best {
                break;
            }
            let axis = |center: i64, max: i64| (center - ring).max(0)..=(center + ring).min(max);
            for x in axis(c.0, self.key_max.0) {
                for y in axis(c.1, self.key_max.1) {
                    let on_shell = (x - c.0).abs() == ring || (y - c.1).abs() == ring;
                    let mut visit = |z: i64| {
                        if let Some(ids) = self.cells.get(&(x, y, z)) {
                            for &i in ids {
                                best = best.min(q.distance(self.points[i]));
                            }
                        }
                    };
                    if on_shell {
                        axis(c.2, self.key_max.2).for_each(&mut visit);
                    } else {
                        visit(c.2 - ring);
                        if ring > 0 {
                            visit(c.2 + ring);
                        }
                    }
                }
            }
        }
        best
    }
}
