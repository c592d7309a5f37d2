use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel coordinate: `x` is the column, `y` the row, origin at the top-left
/// pixel center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Minimum number of control points for a non-degenerate thin-plate spline.
pub const MIN_LANDMARKS: usize = 4;

/// Ordered facial landmarks together with the extents of the image they were
/// placed on.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
    width: usize,
    height: usize,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>, width: usize, height: usize) -> Result<Self> {
        if points.len() < MIN_LANDMARKS {
            return Err(Error::Landmarks(format!(
                "need at least {MIN_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            let inside = p.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x < width as f64
                && p.y < height as f64;
            if !inside {
                return Err(Error::Landmarks(format!(
                    "point {i} ({}, {}) outside the {width}×{height} image",
                    p.x, p.y
                )));
            }
        }
        Ok(LandmarkSet { points, width, height })
    }

    pub fn from_json_str(json: &str, width: usize, height: usize) -> Result<Self> {
        let points: Vec<Point> = serde_json::from_str(json)
            .map_err(|e| Error::Landmarks(format!("expected a JSON array of [x, y] pairs: {e}")))?;
        Self::new(points, width, height)
    }

    /// Loads a landmark file and validates it against the image extents.
    pub fn load(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, width, height).map_err(|e| match e {
            Error::Landmarks(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.points).expect("points serialize")
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Rescales every point by `(width / self.width, height / self.height)`,
    /// mapping image-space landmarks onto a feature map of the given extents.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let points = self.points.iter().map(|p| Point::new(p.x * sx, p.y * sy)).collect();
        Self::new(points, width, height)
    }

    /// The ordered sub-set at `indices`, on the same image.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices
            .iter()
            .map(|&i| {
                self.points.get(i).copied().ok_or_else(|| {
                    Error::Landmarks(format!("index {i} out of range for {} points", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, self.width, self.height)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        let points = self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect();
        Self::new(points, self.width, self.height)
    }
}

/// Which landmark indices belong to which facial part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceLayout {
    pub left_eye: Vec<usize>,
    pub right_eye: Vec<usize>,
    pub lips: Vec<usize>,
}

impl FaceLayout {
    /// The compact 17-point layout used by the bundled fixtures:
    /// 0–4 face contour (left temple, left jaw, chin, right jaw, right temple),
    /// 5–8 left eye ring, 9–12 right eye ring, 13–16 mouth ring
    /// (each ring ordered outer/left corner, top, inner/right corner, bottom).
    pub fn compact17() -> Self {
        FaceLayout { left_eye: (5..9).collect(), right_eye: (9..13).collect(), lips: (13..17).collect() }
    }

    /// The common 68-point annotation (eyes 36–47, mouth 48–67).
    pub fn ibug68() -> Self {
        FaceLayout { left_eye: (36..42).collect(), right_eye: (42..48).collect(), lips: (48..68).collect() }
    }

    pub fn for_count(n: usize) -> Result<Self> {
        match n {
            17 => Ok(Self::compact17()),
            68 => Ok(Self::ibug68()),
            _ => Err(Error::Landmarks(format!(
                "no facial layout for {n} landmarks (supported: 17, 68)"
            ))),
        }
    }

    pub fn eyes(&self) -> Vec<usize> {
        self.left_eye.iter().chain(&self.right_eye).copied().collect()
    }
}
