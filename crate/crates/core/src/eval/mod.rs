//! Accuracy, confusion matrices, two-net score fusion and descriptor
//! centroids.

mod centroids;
mod confusion;
mod fusion;
mod plot;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use centroids::{compute_centroids, nearest_centroid, CentroidSet};
pub use confusion::ConfusionMatrix;
pub use fusion::{
    absolute_improvement, fuse_scores, fuse_tensors, residual_error_reduction, FusionConfig, FusionReport,
    FUSION_METHOD,
};
pub use plot::plot_sphere;

use crate::arch::{forward, ArchSpec, ModelParams};
use crate::dataset::{LabeledImages, Quality};
use crate::train::softmax;
use crate::{Error, Result, Tensor};

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Indices of the `k` largest entries, descending, ties by lower index.
pub fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Network outputs for a labeled set, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// `[N, K]` softmax rows.
    pub probs: Tensor,
    /// `[N, D]` unit-norm descriptors.
    pub descriptors: Tensor,
}

/// Inference over `data` in chunks of `batch_size`. With `workers > 1` the
/// chunks are spread over scoped threads; outputs are reassembled in order,
/// so the result does not depend on the worker count.
pub fn predict(
    params: &ModelParams,
    arch: &ArchSpec,
    data: &LabeledImages,
    batch_size: usize,
    workers: usize,
) -> Result<Predictions> {
    if data.is_empty() {
        return Err(Error::Data("nothing to predict".into()));
    }
    let order: Vec<usize> = (0..data.len()).collect();
    let chunks: Vec<&[usize]> = order.chunks(batch_size.max(1)).collect();
    let run = |chunk: &[usize]| -> Result<(Tensor, Tensor)> {
        let out = forward(params, arch, &data.batch(chunk)?)?;
        Ok((softmax(&out.logits)?, out.descriptor))
    };
    let results: Vec<Result<(Tensor, Tensor)>> = if workers <= 1 {
        chunks.iter().map(|c| run(c)).collect()
    } else {
        let mut slots: Vec<Option<Result<(Tensor, Tensor)>>> = (0..chunks.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let chunks = &chunks;
                    let run = &run;
                    scope.spawn(move || {
                        (w..chunks.len())
                            .step_by(workers)
                            .map(|i| (i, run(chunks[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("prediction worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every chunk assigned")).collect()
    };
    let mut probs = Vec::new();
    let mut desc = Vec::new();
    for r in results {
        let (p, d) = r?;
        probs.push(p);
        desc.push(d);
    }
    Ok(Predictions {
        probs: Tensor::cat_batch(&probs.iter().collect::<Vec<_>>())?,
        descriptors: Tensor::cat_batch(&desc.iter().collect::<Vec<_>>())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    pub samples: usize,
    pub correct: usize,
    pub top1: f64,
}

impl SubsetAccuracy {
    fn new(samples: usize, correct: usize) -> Self {
        Self {
            samples,
            correct,
            top1: if samples == 0 { 0.0 } else { correct as f64 / samples as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub samples: usize,
    pub correct: usize,
    pub top1: f64,
    /// Present when the label space has at least five classes.
    pub top5: Option<f64>,
    /// Keyed by quality name (`good`, `bad`); only qualities that occur.
    pub per_quality: BTreeMap<String, SubsetAccuracy>,
}

impl AccuracyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }

    pub fn quality(&self, q: Quality) -> Option<&SubsetAccuracy> {
        self.per_quality.get(q.name())
    }
}

/// Scores `[N, K]` against labels: argmax accuracy, top-5, per-quality
/// split and the confusion matrix over `names`.
pub fn evaluate_scores(
    scores: &Tensor,
    labels: &[usize],
    qualities: &[Quality],
    names: &[String],
) -> Result<(AccuracyReport, ConfusionMatrix)> {
    let (n, k) = scores.dims2()?;
    if labels.len() != n || qualities.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} score rows, {} labels, {} qualities",
            labels.len(),
            qualities.len()
        )));
    }
    if names.len() != k {
        return Err(Error::Incompatible {
            expected: format!("{k} class names"),
            found: format!("{}", names.len()),
        });
    }
    let mut cm = ConfusionMatrix::new(names.to_vec());
    let mut top5 = 0;
    let mut by_quality: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (i, row) in scores.data().chunks_exact(k).enumerate() {
        let label = labels[i];
        if label >= k {
            return Err(Error::Data(format!("sample {i} has label {label}, head has {k} classes")));
        }
        let pred = argmax(row);
        cm.add(label, pred);
        if top_k(row, 5).contains(&label) {
            top5 += 1;
        }
        let e = by_quality.entry(qualities[i].name().to_string()).or_default();
        e.0 += 1;
        e.1 += (pred == label) as usize;
    }
    let correct = cm.correct() as usize;
    let report = AccuracyReport {
        samples: n,
        correct,
        top1: correct as f64 / n.max(1) as f64,
        top5: (k >= 5).then(|| top5 as f64 / n.max(1) as f64),
        per_quality: by_quality
            .into_iter()
            .map(|(q, (s, c))| (q, SubsetAccuracy::new(s, c)))
            .collect(),
    };
    Ok((report, cm))
}

/// Forward pass plus [`evaluate_scores`].
pub fn evaluate(
    params: &ModelParams,
    arch: &ArchSpec,
    data: &LabeledImages,
    names: &[String],
) -> Result<(AccuracyReport, ConfusionMatrix, Predictions)> {
    if names.len() != arch.classes() {
        return Err(Error::Incompatible {
            expected: format!("{} classes in the head", arch.classes()),
            found: format!("{} label names", names.len()),
        });
    }
    if let Some((i, &l)) = data.labels.iter().enumerate().find(|(_, &l)| l >= arch.classes()) {
        return Err(Error::Data(format!(
            "record {i} ({}) has class {l}, head has {} classes",
            data.ids[i],
            arch.classes()
        )));
    }
    let pred = predict(params, arch, data, 64, 1)?;
    let (report, cm) = evaluate_scores(&pred.probs, &data.labels, &data.qualities, names)?;
    Ok((report, cm, pred))
}
