use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be nonempty"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub size: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { size: 17 }
    }
}

impl PatchConfig {
    pub fn new(size: usize) -> Result<Self> {
        let cfg = Self { size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 3 || self.size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "patch size must be odd and >= 3, got {}",
                self.size
            )));
        }
        Ok(())
    }
}

/// Square crop, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    size: usize,
    pixels: Vec<f64>,
}

impl Patch {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != size * size {
            return Err(Error::invalid(format!(
                "{size}x{size} patch needs {} pixels, got {}",
                size * size,
                pixels.len()
            )));
        }
        Ok(Self { size, pixels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }
}

/// Crops a `size x size` window centered on `(row, col)`. Pixels falling
/// outside the image take the value of the nearest edge pixel.
pub fn extract_patch(image: &GrayImage, center: (usize, usize), cfg: &PatchConfig) -> Result<Patch> {
    cfg.validate()?;
    let (row, col) = center;
    if row >= image.height() || col >= image.width() {
        return Err(Error::invalid(format!(
            "patch center ({row}, {col}) outside {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let half = (cfg.size / 2) as isize;
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;
    let mut pixels = Vec::with_capacity(cfg.size * cfg.size);
    for dr in -half..=half {
        let r = clamp(row as isize + dr, image.height());
        for dc in -half..=half {
            let c = clamp(col as isize + dc, image.width());
            pixels.push(image.at(r, c));
        }
    }
    Patch::new(cfg.size, pixels)
}

/// Nearest pixel `(row, col)` for a point given in image-fraction units.
pub fn landmark_pixel(image: &GrayImage, x: f64, y: f64) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::invalid(format!(
            "landmark ({x}, {y}) lies outside the image"
        )));
    }
    let col = (x * (image.width() - 1) as f64).round() as usize;
    let row = (y * (image.height() - 1) as f64).round() as usize;
    Ok((row, col))
}

/// One patch per point, index-aligned with `points` (image-fraction units).
pub fn patches_for_landmarks(
    image: &GrayImage,
    points: impl IntoIterator<Item = (f64, f64)>,
    cfg: &PatchConfig,
) -> Result<Vec<Patch>> {
    points
        .into_iter()
        .map(|(x, y)| extract_patch(image, landmark_pixel(image, x, y)?, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        let px = (0..w * h).map(|i| i as f64 / (w * h) as f64).collect();
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn constant_image_constant_patch() {
        let img = GrayImage::filled(48, 48, 0.3).unwrap();
        for center in [(0, 0), (24, 24), (47, 3)] {
            let p = extract_patch(&img, center, &PatchConfig::default()).unwrap();
            assert!(p.pixels().iter().all(|&v| v == 0.3));
        }
    }

    #[test]
    fn corner_patch_replicates_edges() {
        let img = ramp(48, 48);
        let p = extract_patch(&img, (0, 0), &PatchConfig::default()).unwrap();
        for r in 0..17 {
            for c in 0..17 {
                let src = (r.max(8) - 8, c.max(8) - 8);
                assert_eq!(p.at(r, c), img.at(src.0, src.1));
            }
        }
        // interior quadrant is the exact image corner
        assert_eq!(p.at(8, 8), img.at(0, 0));
        assert_eq!(p.at(16, 16), img.at(8, 8));
    }

    #[test]
    fn interior_patch_is_submatrix() {
        let img = ramp(48, 48);
        let p = extract_patch(&img, (24, 20), &PatchConfig::default()).unwrap();
        for r in 0..17 {
            for c in 0..17 {
                assert_eq!(p.at(r, c), img.at(24 - 8 + r, 20 - 8 + c));
            }
        }
    }

    #[test]
    fn center_outside_rejected() {
        let img = ramp(8, 8);
        assert!(extract_patch(&img, (8, 0), &PatchConfig::default()).is_err());
    }

    #[test]
    fn patch_size_validation() {
        assert!(PatchConfig::new(4).is_err());
        assert!(PatchConfig::new(1).is_err());
        assert!(PatchConfig::new(3).is_ok());
    }

    #[test]
    fn landmark_pixel_rounds() {
        let img = ramp(48, 48);
        assert_eq!(landmark_pixel(&img, 0.0, 1.0).unwrap(), (47, 0));
        assert_eq!(landmark_pixel(&img, 0.5, 0.5).unwrap(), (24, 24));
        assert!(landmark_pixel(&img, 1.1, 0.5).is_err());
    }
}
