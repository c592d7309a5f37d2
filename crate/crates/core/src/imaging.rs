//! Conversions between 8-bit RGB images and `H×W×3` tensors, plus PNG I/O.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `H×W×3` tensor holding the raw 0–255 channel values.
pub fn rgb_to_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| v as f64).collect();
    Tensor::new([h as usize, w as usize, 3], data).expect("rgb extents")
}

/// Rounds to the nearest level and clamps into 0–255.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Inverse of [`rgb_to_tensor`]; values are rounded and clamped.
pub fn tensor_to_rgb(t: &Tensor) -> Result<RgbImage> {
    let (h, w, c) = t.dims3()?;
    if c != 3 {
        return Err(Error::Dimension(format!("expected 3 channels, got {c}")));
    }
    let raw = t.data().iter().map(|&v| quantize(v)).collect();
    Ok(RgbImage::from_raw(w as u32, h as u32, raw).expect("rgb extents"))
}

/// Maps 0–255 levels onto `[-1, 1]`, the range the generator works in.
pub fn rgb_to_signed(img: &RgbImage) -> Tensor {
    rgb_to_tensor(img).map(|v| v / 127.5 - 1.0)
}

pub fn signed_to_rgb(t: &Tensor) -> Result<RgbImage> {
    tensor_to_rgb(&t.map(|v| (v + 1.0) * 127.5))
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found")));
    }
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(img.to_rgb8())
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|e| Error::format(path, e.to_string()))
}

pub fn solid(width: u32, height: u32, value: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip() {
        let img = RgbImage::from_fn(5, 3, |x, y| Rgb([x as u8 * 40, y as u8 * 90, 7]));
        let t = rgb_to_tensor(&img);
        assert_eq!(t.shape(), &[3, 5, 3]);
        assert_eq!(t.at3(2, 4, 1), 180.0);
        assert_eq!(tensor_to_rgb(&t).unwrap(), img);
        assert_eq!(signed_to_rgb(&rgb_to_signed(&img)).unwrap(), img);
    }

    #[test]
    fn quantize_clamps() {
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(254.6), 255);
        assert_eq!(quantize(300.0), 255);
        assert_eq!(quantize(99.5), 100);
    }
}
