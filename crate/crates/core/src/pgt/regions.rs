use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FaceLayout, LandmarkSet, Point};
use crate::mask::Mask;

/// Ring radius for synthesized eye-shadow, as a fraction of the distance
/// between the two eye centroids.
pub const EYESHADOW_RING_FRACTION: f64 = 0.12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Skin,
    Lip,
    Eyeshadow,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Skin, Region::Lip, Region::Eyeshadow];

    pub fn name(self) -> &'static str {
        match self {
            Region::Skin => "skin",
            Region::Lip => "lip",
            Region::Eyeshadow => "eyeshadow",
        }
    }

    /// Landmark indices that steer the detail warp for this region.
    pub fn landmark_indices(self, layout: &FaceLayout, count: usize) -> Vec<usize> {
        match self {
            Region::Skin => (0..count).collect(),
            Region::Lip => layout.lips.clone(),
            Region::Eyeshadow => layout.eyes(),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skin" => Ok(Region::Skin),
            "lip" => Ok(Region::Lip),
            "eyeshadow" => Ok(Region::Eyeshadow),
            _ => Err(Error::Config(format!("unknown region `{s}` (expected skin, lip or eyeshadow)"))),
        }
    }
}

/// Skin, lip and eye-shadow masks for one face, plus any user masks.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    skin: Mask,
    lip: Mask,
    eyeshadow: Mask,
    extra: BTreeMap<String, Mask>,
}

impl RegionMasks {
    pub fn new(skin: Mask, lip: Mask, eyeshadow: Mask) -> Result<Self> {
        for (name, m) in [("lip", &lip), ("eyeshadow", &eyeshadow)] {
            if !m.same_extents(&skin) {
                return Err(Error::Dimension(format!(
                    "{name} mask is {}×{} but the skin mask is {}×{}",
                    m.width(),
                    m.height(),
                    skin.width(),
                    skin.height()
                )));
            }
        }
        for (a, ma, b, mb) in
            [("skin", &skin, "lip", &lip), ("skin", &skin, "eyeshadow", &eyeshadow), ("lip", &lip, "eyeshadow", &eyeshadow)]
        {
            if ma.intersects(mb) {
                return Err(Error::Contract(format!("{a} and {b} masks overlap")));
            }
        }
        Ok(RegionMasks { skin, lip, eyeshadow, extra: BTreeMap::new() })
    }

    /// Builds the eye-shadow mask from the eye landmarks and carves it out of
    /// the skin so the three regions stay disjoint.
    pub fn with_synthesized_eyeshadow(skin: Mask, lip: Mask, landmarks: &LandmarkSet) -> Result<Self> {
        let ring = synthesize_eyeshadow(landmarks)?.minus(&lip);
        if !ring.same_extents(&skin) {
            return Err(Error::Dimension("landmark extents differ from the mask extents".into()));
        }
        let skin = skin.minus(&ring);
        Self::new(skin, lip, ring)
    }

    /// Reads `skin.png`, `lip.png` and optionally `eyeshadow.png` from a
    /// directory. A missing eye-shadow mask is synthesized from `landmarks`.
    pub fn load_dir(dir: impl AsRef<Path>, landmarks: &LandmarkSet) -> Result<Self> {
        let dir = dir.as_ref();
        let skin = Mask::load(dir.join("skin.png"))?;
        let lip = Mask::load(dir.join("lip.png"))?;
        let eye_path = dir.join("eyeshadow.png");
        if eye_path.exists() {
            Self::new(skin, lip, Mask::load(eye_path)?)
        } else {
            Self::with_synthesized_eyeshadow(skin, lip, landmarks)
        }
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for r in Region::ALL {
            self.get(r).save(dir.join(format!("{}.png", r.name())))?;
        }
        Ok(())
    }

    pub fn with_extra(mut self, name: impl Into<String>, mask: Mask) -> Result<Self> {
        if !mask.same_extents(&self.skin) {
            return Err(Error::Dimension("extra mask extents differ from the region masks".into()));
        }
        self.extra.insert(name.into(), mask);
        Ok(self)
    }

    pub fn get(&self, region: Region) -> &Mask {
        match region {
            Region::Skin => &self.skin,
            Region::Lip => &self.lip,
            Region::Eyeshadow => &self.eyeshadow,
        }
    }

    pub fn extra(&self, name: &str) -> Option<&Mask> {
        self.extra.get(name)
    }

    pub fn width(&self) -> usize {
        self.skin.width()
    }

    pub fn height(&self) -> usize {
        self.skin.height()
    }

    /// Pixels covered by any of the three regions.
    pub fn covered(&self) -> Mask {
        self.skin.union(&self.lip).union(&self.eyeshadow)
    }
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Even-odd point-in-polygon test.
fn inside_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

fn boundary_distance(p: Point, poly: &[Point]) -> f64 {
    (0..poly.len()).map(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()])).fold(f64::INFINITY, f64::min)
}

/// Ring around each eye contour: pixels within
/// [`EYESHADOW_RING_FRACTION`] × inter-ocular distance of the contour,
/// excluding the eye interior.
pub fn synthesize_eyeshadow(landmarks: &LandmarkSet) -> Result<Mask> {
    let layout = FaceLayout::for_count(landmarks.len())?;
    let pts = landmarks.points();
    let left: Vec<Point> = layout.left_eye.iter().map(|&i| pts[i]).collect();
    let right: Vec<Point> = layout.right_eye.iter().map(|&i| pts[i]).collect();
    let radius = EYESHADOW_RING_FRACTION * centroid(&left).dist(centroid(&right));
    if radius <= 0.0 {
        return Err(Error::Landmarks("eye centroids coincide".into()));
    }
    Ok(Mask::from_fn(landmarks.width(), landmarks.height(), |i, j| {
        let p = Point::new(j as f64, i as f64);
        [&left, &right].iter().any(|eye| !inside_polygon(p, eye) && boundary_distance(p, eye) <= radius)
    }))
}
