use serde::{Deserialize, Serialize};

use super::image::Image;
use super::resample::bilinear_resize;
use crate::{Error, Result};

/// Axis-aligned region in pixel units: `[x, x + width) × [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl BBox {
    pub fn full(img: &Image) -> Self {
        Self {
            x: 0,
            y: 0,
            width: img.width(),
            height: img.height(),
        }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0 && self.height > 0 && self.x + self.width <= width && self.y + self.height <= height
    }
}

impl std::str::FromStr for BBox {
    type Err = Error;

    /// `x,y,width,height`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bbox {s:?}: {e}")))?;
        match parts[..] {
            [x, y, width, height] => Ok(Self { x, y, width, height }),
            _ => Err(Error::InvalidArgument(format!("bbox {s:?} needs x,y,width,height"))),
        }
    }
}

/// Exact pixel crop of `bbox`, resized bilinearly to `out_w × out_h`.
pub fn roi_crop(img: &Image, bbox: &BBox, out_w: usize, out_h: usize) -> Result<Image> {
    if !bbox.fits(img.width(), img.height()) {
        return Err(Error::InvalidArgument(format!(
            "bbox {bbox:?} outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut planes: [Vec<f64>; 3] = Default::default();
    for (c, plane) in planes.iter_mut().enumerate() {
        let src = img.plane(c);
        for y in bbox.y..bbox.y + bbox.height {
            let row = y * img.width();
            plane.extend_from_slice(&src[row + bbox.x..row + bbox.x + bbox.width]);
        }
    }
    let crop = Image::from_planes(bbox.width, bbox.height, planes)?;
    Ok(bilinear_resize(&crop, out_w, out_h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_box_same_size_is_identity() {
        let img = Image::new(4, 3, (0..36).map(|i| (i as f64 * 0.1).sin().abs()).collect()).unwrap();
        assert_eq!(roi_crop(&img, &BBox::full(&img), 4, 3).unwrap(), img);
    }

    #[test]
    fn upsized_corners_keep_source_corners() {
        let img = Image::new(2, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.25]).unwrap();
        let out = roi_crop(&img, &BBox::full(&img), 4, 4).unwrap();
        for c in 0..3 {
            assert_eq!(out.get(c, 0, 0), img.get(c, 0, 0));
            assert_eq!(out.get(c, 0, 3), img.get(c, 0, 1));
            assert_eq!(out.get(c, 3, 0), img.get(c, 1, 0));
            assert_eq!(out.get(c, 3, 3), img.get(c, 1, 1));
        }
    }

    #[test]
    fn constant_image_crops_to_constant() {
        let img = Image::filled(10, 8, [0.3, 0.6, 0.9]);
        let bbox = BBox { x: 2, y: 1, width: 5, height: 3 };
        let out = roi_crop(&img, &bbox, 7, 7).unwrap();
        for c in 0..3 {
            assert!(out.plane(c).iter().all(|&v| (v - [0.3, 0.6, 0.9][c]).abs() < 1e-15));
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let img = Image::filled(4, 4, [0.0; 3]);
        let bbox = BBox { x: 2, y: 0, width: 3, height: 2 };
        assert!(matches!(roi_crop(&img, &bbox, 4, 4), Err(Error::InvalidArgument(_))));
        assert!("1,2,3".parse::<BBox>().is_err());
        assert_eq!("1,2,3,4".parse::<BBox>().unwrap(), BBox { x: 1, y: 2, width: 3, height: 4 });
    }
}
