//! Manifests, labels, image preprocessing and the synthetic corpus.

pub mod degrade;
pub mod image;
pub mod labels;
pub mod manifest;
pub mod resample;
pub mod roi;
pub mod split;
pub mod synth;

pub use self::image::Image;
pub use degrade::{degrade, DegradeConfig};
pub use labels::{default_palette, ClassEntry, ColorEntry, LabelSpace, MakeModel};
pub use manifest::{validate_manifest, Manifest, ManifestHeader, Quality, SampleRecord, View, Violation};
pub use roi::{roi_crop, BBox};
pub use split::{split, Split};
pub use synth::{synth_generate, synth_samples, SynthSpec};

use crate::{Error, Result, Tensor};

/// Which attribute a record is labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    MakeModel,
    Color,
}

impl Task {
    pub fn label(self, header: &ManifestHeader, record: &SampleRecord) -> Result<usize> {
        match self {
            Task::MakeModel => Ok(record.classid),
            Task::Color => header
                .color_index(&record.color)
                .ok_or_else(|| Error::Data(format!("{}: color {:?} not in palette", record.image, record.color))),
        }
    }

    pub fn label_space(self, header: &ManifestHeader) -> LabelSpace {
        match self {
            Task::MakeModel => header.make_model_labels(),
            Task::Color => header.color_labels(),
        }
    }
}

/// Preprocessed images with one label each, ready for batching.
///
/// Pixels are kept at the 8-bit precision image files have (planar RGB),
/// which keeps large synthetic sets in memory; [`prepare`] applies the same
/// rounding at inference time.
#[derive(Debug, Clone, Default)]
pub struct LabeledImages {
    width: usize,
    height: usize,
    pixels: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
    pub qualities: Vec<Quality>,
    /// Stable per-sample identifiers (image path, plus bbox when present).
    pub ids: Vec<String>,
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Width and height shared by every sample (0×0 when empty).
    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn push(&mut self, image: &Image, label: usize, quality: Quality, id: String) -> Result<()> {
        if self.is_empty() {
            (self.width, self.height) = (image.width(), image.height());
        } else if (image.width(), image.height()) != (self.width, self.height) {
            return Err(Error::InvalidArgument(format!(
                "{id}: {}x{} image in a {}x{} set",
                image.width(),
                image.height(),
                self.width,
                self.height
            )));
        }
        self.pixels.push(image.data().iter().map(|&v| to_u8(v)).collect());
        self.labels.push(label);
        self.qualities.push(quality);
        self.ids.push(id);
        Ok(())
    }

    pub fn image(&self, i: usize) -> Image {
        let data = self.pixels[i].iter().map(|&b| f64::from(b) / 255.0).collect();
        Image::new(self.width, self.height, data).expect("consistent size")
    }

    pub fn extend(&mut self, other: LabeledImages) -> Result<()> {
        if !self.is_empty() && !other.is_empty() && self.size() != other.size() {
            return Err(Error::InvalidArgument("merging sets of different image sizes".into()));
        }
        if self.is_empty() {
            (self.width, self.height) = other.size();
        }
        self.pixels.extend(other.pixels);
        self.labels.extend(other.labels);
        self.qualities.extend(other.qualities);
        self.ids.extend(other.ids);
        Ok(())
    }

    /// `[n, 3, H, W]` stack of the selected samples.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * 3 * self.width * self.height);
        for &i in indices {
            let px = self
                .pixels
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("batch index {i} out of range")))?;
            data.extend(px.iter().map(|&b| f64::from(b) / 255.0));
        }
        Ok(Tensor::new(vec![indices.len(), 3, self.height, self.width], data)?)
    }

    /// Copies passed through `degrade` and marked bad.
    pub fn degraded(&self, config: &DegradeConfig) -> Result<LabeledImages> {
        self.degraded_where(config, |_| true)
    }

    /// Degrades every sample whose index satisfies `pick`, in place of the
    /// original.
    pub fn degraded_where(&self, config: &DegradeConfig, pick: impl Fn(usize) -> bool) -> Result<LabeledImages> {
        let mut out = LabeledImages::default();
        for i in 0..self.len() {
            if pick(i) {
                out.push(&degrade(&self.image(i), config)?, self.labels[i], Quality::Bad, self.ids[i].clone())?;
            } else {
                out.push(&self.image(i), self.labels[i], self.qualities[i], self.ids[i].clone())?;
            }
        }
        Ok(out)
    }

    pub fn select(&self, keep: impl Fn(usize) -> bool) -> LabeledImages {
        let mut out = LabeledImages {
            width: self.width,
            height: self.height,
            ..Default::default()
        };
        for i in (0..self.len()).filter(|&i| keep(i)) {
            out.pixels.push(self.pixels[i].clone());
            out.labels.push(self.labels[i]);
            out.qualities.push(self.qualities[i]);
            out.ids.push(self.ids[i].clone());
        }
        out
    }
}

pub fn record_id(record: &SampleRecord) -> String {
    match &record.bbox {
        Some(b) => format!("{}#{},{},{},{}", record.image, b.x, b.y, b.width, b.height),
        None => record.image.clone(),
    }
}

/// Crops each record's region (whole image when absent) to `width × height`.
pub fn load_labeled(manifest: &Manifest, task: Task, width: usize, height: usize) -> Result<LabeledImages> {
    let mut out = LabeledImages::default();
    for record in &manifest.records {
        let img = Image::load(&manifest.image_path(record))?;
        let bbox = record.bbox.unwrap_or_else(|| BBox::full(&img));
        let crop = prepare(&img, &bbox, width, height)?;
        out.push(&crop, task.label(&manifest.header, record)?, record.quality, record_id(record))?;
    }
    Ok(out)
}

/// The same samples as [`load_labeled`], rendered in memory.
pub fn synth_labeled(spec: &SynthSpec, task: Task, width: usize, height: usize) -> Result<LabeledImages> {
    let header = synth::synth_header(spec);
    let mut out = LabeledImages::default();
    for (record, rendered) in synth_samples(spec)? {
        let crop = prepare(&rendered.image, &BBox::full(&rendered.image), width, height)?;
        out.push(&crop, task.label(&header, &record)?, record.quality, record_id(&record))?;
    }
    Ok(out)
}

/// Network input for a region: exact crop, bilinear resize to
/// `width × height`, rounding to 8 bits. Whole-image regions already at the
/// target size skip the resize.
pub fn prepare(img: &Image, bbox: &BBox, width: usize, height: usize) -> Result<Image> {
    let full = *bbox == BBox::full(img) && img.width() == width && img.height() == height;
    let out = if full { img.clone() } else { roi_crop(img, bbox, width, height)? };
    Ok(out.quantized())
}
