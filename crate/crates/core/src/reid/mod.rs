//! Best-shot classification, the attribute index and re-identification
//! queries.

mod index;
mod query;

pub use index::{Index, IndexLabels, INDEX_MAGIC, INDEX_VERSION};
pub use query::{query, rerank_by_descriptor, Query, QueryMatch, QuerySpec, COMBINED_SCORE};

use serde::{Deserialize, Serialize};

use crate::arch::forward;
use crate::dataset::{prepare, BBox, Image, LabelSpace};
use crate::eval::{argmax, fuse_scores, top_k, FusionConfig};
use crate::train::{softmax, Checkpoint};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakeModelScore {
    pub classid: usize,
    /// First (canonical) member of the class; the class table lists all.
    pub make: String,
    pub model: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorScore {
    pub index: usize,
    pub color: String,
    pub score: f64,
}

/// One classified detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestShotRecord {
    pub id: String,
    /// File or frame reference.
    pub source: String,
    pub timestamp: Option<String>,
    /// Unit-norm descriptor of the first make/model network.
    pub descriptor: Vec<f64>,
    /// Top-k make/model classes, descending by score.
    pub makemodel: Vec<MakeModelScore>,
    pub color: ColorScore,
}

impl BestShotRecord {
    pub fn top_class(&self) -> &MakeModelScore {
        &self.makemodel[0]
    }
}

/// Make/model network(s) plus the color network.
#[derive(Debug, Clone)]
pub struct Classifier {
    makemodel: Vec<Checkpoint>,
    color: Checkpoint,
    fusion: FusionConfig,
    top_k: usize,
}

impl Classifier {
    /// One or two make/model checkpoints (two are fused with `fusion`), and
    /// a color checkpoint. All must share the input size.
    pub fn new(makemodel: Vec<Checkpoint>, color: Checkpoint, fusion: FusionConfig, top_k: usize) -> Result<Self> {
        let incompatible = |expected: String, found: String| Err(Error::Incompatible { expected, found });
        if makemodel.is_empty() || makemodel.len() > 2 {
            return Err(Error::InvalidArgument(format!("need 1 or 2 make/model checkpoints, got {}", makemodel.len())));
        }
        if !matches!(color.labels, LabelSpace::Color { .. }) {
            return incompatible("a color checkpoint".into(), "other label space".into());
        }
        for c in &makemodel {
            if !matches!(c.labels, LabelSpace::MakeModel { .. }) {
                return incompatible("a make/model checkpoint".into(), "other label space".into());
            }
            if c.label_hash() != makemodel[0].label_hash() {
                return incompatible(
                    format!("label space {:016x}", makemodel[0].label_hash()),
                    format!("{:016x}", c.label_hash()),
                );
            }
            if c.arch.input != color.arch.input {
                return incompatible(format!("input {:?}", color.arch.input), format!("{:?}", c.arch.input));
            }
        }
        Ok(Self {
            makemodel,
            color,
            fusion,
            top_k: top_k.max(1),
        })
    }

    pub fn labels(&self) -> IndexLabels {
        IndexLabels {
            makemodel: self.makemodel[0].labels.clone(),
            color: self.color.labels.clone(),
        }
    }

    /// Crops `bbox` (whole image when absent), resizes to the network input
    /// and runs every network once.
    pub fn classify_image(&self, img: &Image, bbox: Option<BBox>, id: &str, source: &str) -> Result<BestShotRecord> {
        let input = self.color.arch.input;
        let bbox = bbox.unwrap_or_else(|| BBox::full(img));
        let batch = prepare(img, &bbox, input.width, input.height)?.to_tensor();
        let mut probs: Option<Vec<f64>> = None;
        let mut descriptor = Vec::new();
        for (i, ck) in self.makemodel.iter().enumerate() {
            let out = forward(&ck.params, &ck.arch, &batch)?;
            let p = softmax(&out.logits)?.into_data();
            if i == 0 {
                descriptor = out.descriptor.into_data();
            }
            probs = Some(match probs {
                None => p,
                Some(prev) => fuse_scores(&prev, &p, &self.fusion)?,
            });
        }
        let probs = probs.expect("at least one make/model net");
        let LabelSpace::MakeModel { classes } = &self.makemodel[0].labels else {
            unreachable!("checked in new");
        };
        let makemodel = top_k(&probs, self.top_k)
            .into_iter()
            .map(|c| {
                let (make, model) = match classes[c].members.first() {
                    Some(m) => (m.make.clone(), m.model.clone()),
                    None => (format!("class{c}"), String::new()),
                };
                MakeModelScore {
                    classid: c,
                    make,
                    model,
                    score: probs[c],
                }
            })
            .collect();
        let out = forward(&self.color.params, &self.color.arch, &batch)?;
        let cp = softmax(&out.logits)?.into_data();
        let c = argmax(&cp);
        Ok(BestShotRecord {
            id: id.to_string(),
            source: source.to_string(),
            timestamp: None,
            descriptor,
            makemodel,
            color: ColorScore {
                index: c,
                color: self.color.labels.names()[c].clone(),
                score: cp[c],
            },
        })
    }
}

/// One image to index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexInput {
    pub id: String,
    pub path: std::path::PathBuf,
    pub bbox: Option<BBox>,
}

/// Classifies every input, in order.
pub fn index_build(classifier: &Classifier, inputs: &[IndexInput]) -> Result<Index> {
    let mut records = Vec::with_capacity(inputs.len());
    for input in inputs {
        let img = Image::load(&input.path)?;
        records.push(classifier.classify_image(&img, input.bbox, &input.id, &input.path.display().to_string())?);
    }
    Index::new(classifier.labels(), records)
}
