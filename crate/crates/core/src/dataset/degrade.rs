use serde::{Deserialize, Serialize};

use super::image::Image;
use super::resample::{area_resize, bilinear_resize, gaussian_blur};
use crate::{Error, Result};

/// Blur-then-downscale quality degradation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeConfig {
    /// Gaussian sigma in pixels; 0 disables blurring.
    pub sigma: f64,
    /// Downscale factor ≥ 1; 1 disables resampling.
    pub factor: f64,
}

impl DegradeConfig {
    pub const IDENTITY: Self = Self { sigma: 0.0, factor: 1.0 };
    /// The "bad quality" preset for 64×64 inputs.
    pub const BAD_QUALITY: Self = Self { sigma: 1.5, factor: 4.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.factor >= 1.0) || !self.factor.is_finite() {
            return Err(Error::InvalidArgument(format!("downscale factor must be ≥ 1, got {}", self.factor)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("blur sigma must be ≥ 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Gaussian blur (3σ truncation, unit-sum kernel), area downscale by
/// `factor`, then bilinear upscale back to the original size.
pub fn degrade(img: &Image, config: &DegradeConfig) -> Result<Image> {
    config.validate()?;
    let blurred = gaussian_blur(img, config.sigma);
    if config.factor == 1.0 {
        return Ok(blurred);
    }
    let small_w = ((img.width() as f64 / config.factor).round() as usize).max(1);
    let small_h = ((img.height() as f64 / config.factor).round() as usize).max(1);
    let small = area_resize(&blurred, small_w, small_h);
    Ok(bilinear_resize(&small, img.width(), img.height()))
}
