//! Dense metric depth maps and the box-median rule.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Box2D;

/// Where a depth map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthSource {
    /// Laser-scan ground truth rendered into the frame.
    Gt,
    /// On-device sensor depth.
    Arkit,
    /// Monocular estimate.
    Mono,
}

impl DepthSource {
    pub const ALL: [DepthSource; 3] = [DepthSource::Gt, DepthSource::Arkit, DepthSource::Mono];

    /// File-name tag used in scene directories.
    pub fn tag(self) -> &'static str {
        match self {
            DepthSource::Gt => "gt",
            DepthSource::Arkit => "arkit",
            DepthSource::Mono => "mono",
        }
    }
}

impl fmt::Display for DepthSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown depth source `{0}` (expected gt, arkit or mono)")]
pub struct UnknownDepthSource(pub alloc::string::String);

impl FromStr for DepthSource {
    type Err = UnknownDepthSource;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gt" => Ok(DepthSource::Gt),
            "arkit" => Ok(DepthSource::Arkit),
            "mono" | "monocular" => Ok(DepthSource::Mono),
            other => Err(UnknownDepthSource(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DepthError {
    #[error("depth map of {width}x{height} needs {expected} values, got {actual}")]
    SizeMismatch {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("no valid depth inside the box")]
    EmptyDepthRegion,
}

/// Row-major depth grid in meters with the origin at the top-left pixel.
/// Values that are non-positive or non-finite are holes.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, DepthError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(DepthError::SizeMismatch {
                width,
                height,
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f32> {
        if u >= self.width || v >= self.height {
            return None;
        }
        Some(self.values[v as usize * self.width as usize + u as usize])
    }

    /// Depth at `(u, v)` when it is a usable measurement.
    pub fn valid_at(&self, u: u32, v: u32) -> Option<f64> {
        self.get(u, v).filter(|z| is_valid_depth(*z)).map(f64::from)
    }

    pub fn set(&mut self, u: u32, v: u32, value: f32) {
        let w = self.width as usize;
        self.values[v as usize * w + u as usize] = value;
    }

    pub fn valid_in_box(&self, b: &Box2D) -> Vec<f64> {
        b.pixel_span(self.width, self.height)
            .pixels()
            .filter_map(|(u, v)| self.valid_at(u, v))
            .collect()
    }

    /// Median of the valid depths covered by `b` (clamped to the image).
    ///
    /// This is the one definition used both for CoT depth steps and for
    /// answering `Depth(...)` tool calls.
    pub fn median_in_box(&self, b: &Box2D) -> Result<f64, DepthError> {
        median(self.valid_in_box(b)).ok_or(DepthError::EmptyDepthRegion)
    }
}

pub fn is_valid_depth(z: f32) -> bool {
    z.is_finite() && z > 0.0
}

/// Median with the even-count rule "mean of the two middle values".
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * 0.5
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_rules() {
        assert_eq!(median(vec![]), None);
        assert_eq!(median((1..=9).rev().map(f64::from).collect()), Some(5.0));
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn median_in_box_uses_valid_pixels_only() {
        let values: Vec<f32> = (1..=9).map(|v| v as f32).collect();
        let mut d = DepthMap::new(3, 3, values).unwrap();
        let whole = Box2D::new(0.0, 0.0, 3.0, 3.0).unwrap();
        assert_eq!(d.median_in_box(&whole), Ok(5.0));
        d.set(0, 0, f32::NAN);
        d.set(1, 0, -1.0);
        // remaining 3..=9 -> 6
        assert_eq!(d.median_in_box(&whole), Ok(6.0));
        let outside = Box2D::new(10.0, 10.0, 20.0, 20.0).unwrap();
        assert_eq!(d.median_in_box(&outside), Err(DepthError::EmptyDepthRegion));
    }

    #[test]
    fn size_checked() {
        assert!(matches!(
            DepthMap::new(2, 2, vec![1.0; 3]),
            Err(DepthError::SizeMismatch { expected: 4, actual: 3, .. })
        ));
    }

    #[test]
    fn source_tags_parse_back() {
        for s in DepthSource::ALL {
            assert_eq!(s.tag().parse::<DepthSource>(), Ok(s));
        }
        assert!("lidar".parse::<DepthSource>().is_err());
    }
}
