use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pixel values at or above this are inside when loading 8-bit mask files.
pub const MASK_THRESHOLD: u8 = 128;

/// Binary per-pixel region mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}×{height} mask needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Mask { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask { width, height, data: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask { width, height, data: vec![true; width * height] }
    }

    /// `f(row, col)` decides membership.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Mask { width, height, data }
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Mask { width: w as usize, height: h as usize, data: img.pixels().map(|p| p.0[0] >= MASK_THRESHOLD).collect() }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(y as usize, x as usize) { 255 } else { 0 }])
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "mask file not found")));
        }
        let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(Self::from_gray(&img.to_luma8()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_gray().save(path).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn same_extents(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).any(|(&a, &b)| a && b)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask { data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(), ..self.clone() }
    }

    pub fn minus(&self, other: &Mask) -> Mask {
        Mask { data: self.data.iter().zip(&other.data).map(|(&a, &b)| a && !b).collect(), ..self.clone() }
    }

    /// `H×W` tensor of 0/1 values.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([self.height, self.width], self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .expect("mask extents")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_threshold() {
        let img = GrayImage::from_raw(4, 1, vec![0, 127, 128, 255]).unwrap();
        assert_eq!(Mask::from_gray(&img).data(), &[false, false, true, true]);
    }

    #[test]
    fn set_algebra() {
        let a = Mask::from_fn(4, 4, |i, _| i < 2);
        let b = Mask::from_fn(4, 4, |_, j| j < 2);
        assert_eq!(a.union(&b).count(), 12);
        assert_eq!(a.minus(&b).count(), 4);
        assert!(a.intersects(&b));
        assert!(!a.intersects(&a.minus(&a)));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = Mask::from_fn(5, 3, |i, j| (i + j) % 2 == 0);
        m.save(&path).unwrap();
        assert_eq!(Mask::load(&path).unwrap(), m);
        assert!(matches!(Mask::load(dir.path().join("missing.png")), Err(Error::Io { .. })));
    }
}
