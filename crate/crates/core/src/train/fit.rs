use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use crate::arch::{forward_graph, ArchSpec, ModelParams, NormMode};
use crate::dataset::LabeledImages;
use crate::hash::hash64;
use crate::{Error, Result, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `M`, samples per step. The last batch of an epoch may be smaller.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Weight of the newest batch in the running normalization statistics.
    pub norm_momentum: f64,
    /// Replace running statistics with whole-training-set averages after the
    /// last epoch.
    pub recalibrate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 10,
            seed: 0,
            adam: AdamConfig::default(),
            norm_momentum: 0.1,
            recalibrate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.norm_momentum) {
            return Err(Error::InvalidArgument(format!("norm momentum {} outside [0, 1]", self.norm_momentum)));
        }
        self.adam.validate()
    }

    /// Stable digest of the settings, stored in checkpoints.
    pub fn hash(&self) -> u64 {
        hash64(serde_json::to_string(self).expect("plain struct").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub trace: Vec<LossPoint>,
    pub steps: u64,
}

impl FitReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,epoch,loss\n");
        for p in &self.trace {
            out.push_str(&format!("{},{},{:e}\n", p.step, p.epoch, p.loss));
        }
        out
    }

    /// Mean loss over the steps of the last epoch.
    pub fn final_epoch_loss(&self) -> Option<f64> {
        let last = self.trace.last()?.epoch;
        let tail: Vec<f64> = self.trace.iter().filter(|p| p.epoch == last).map(|p| p.loss).collect();
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

fn check_labels(arch: &ArchSpec, data: &LabeledImages) -> Result<()> {
    let k = arch.classes();
    for (i, &label) in data.labels.iter().enumerate() {
        if label >= k {
            return Err(Error::Data(format!(
                "record {i} ({}) has class {label}, but the head has {k} classes",
                data.ids[i]
            )));
        }
    }
    Ok(())
}

/// Mini-batch Adam on mean cross-entropy, with z-normalization layers using
/// batch statistics. Running statistics follow an exponential moving
/// average and, with `recalibrate`, are finally replaced by training-set
/// averages. Deterministic given `(params, data, config)`.
pub fn fit(arch: &ArchSpec, params: &mut ModelParams, data: &LabeledImages, config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    params.check_against(arch)?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    check_labels(arch, data)?;
    let mut report = FitReport { trace: Vec::new(), steps: 0 };
    if config.epochs == 0 {
        return Ok(report);
    }
    let mut adam = AdamState::for_arch(config.adam, params, arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grads, stats) = train_step(arch, params, data, batch)?;
            adam.step(params, &grads)?;
            blend_stats(params, &stats, config.norm_momentum)?;
            report.trace.push(LossPoint {
                step: adam.t,
                epoch,
                loss,
            });
        }
    }
    report.steps = adam.t;
    if config.recalibrate {
        recalibrate(arch, params, data, config.batch_size)?;
    }
    Ok(report)
}

type NormStats = Vec<(String, Vec<f64>, Vec<f64>)>;

fn train_step(
    arch: &ArchSpec,
    params: &ModelParams,
    data: &LabeledImages,
    batch: &[usize],
) -> Result<(f64, BTreeMap<String, Tensor>, NormStats)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, arch, true)?;
    let input = tape.constant(data.batch(batch)?);
    let graph = forward_graph(&mut tape, params, &bound, arch, input, NormMode::Batch)?;
    let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
    let loss = tape.cross_entropy(graph.logits, &labels)?;
    tape.backward(loss)?;
    let mut grads = BTreeMap::new();
    for (key, &var) in &bound {
        let g = tape
            .grad(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(var).shape().to_vec()));
        grads.insert(key.clone(), g);
    }
    Ok((tape.value(loss).item(), grads, collect_stats(&tape, &graph.norms)))
}

fn collect_stats(tape: &Tape, norms: &[crate::arch::NormRecord]) -> NormStats {
    norms
        .iter()
        .filter_map(|n| {
            let s = tape.znorm_stats(n.output)?;
            Some((n.key.clone(), s.mean.clone(), s.var.clone()))
        })
        .collect()
}

fn blend_stats(params: &mut ModelParams, stats: &NormStats, momentum: f64) -> Result<()> {
    for (key, mean, var) in stats {
        for (suffix, batch) in [("mean", mean), ("var", var)] {
            let name = format!("{key}.{suffix}");
            let stored = params
                .get_mut(&name)
                .ok_or_else(|| Error::InvalidState(format!("missing parameter {name}")))?;
            for (s, b) in stored.data_mut().iter_mut().zip(batch) {
                *s = (1.0 - momentum) * *s + momentum * b;
            }
        }
    }
    Ok(())
}

/// Sets every running mean/variance to its population value over `data`,
/// pooled from batch-mode passes in dataset order.
pub fn recalibrate(arch: &ArchSpec, params: &mut ModelParams, data: &LabeledImages, batch_size: usize) -> Result<()> {
    if data.is_empty() || batch_size == 0 {
        return Err(Error::InvalidArgument("recalibration needs data and a positive batch size".into()));
    }
    let order: Vec<usize> = (0..data.len()).collect();
    // key -> (Σ n·mean, Σ n·(var + mean²), Σ n)
    let mut acc: BTreeMap<String, (Vec<f64>, Vec<f64>, f64)> = BTreeMap::new();
    for batch in order.chunks(batch_size) {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, arch, false)?;
        let input = tape.constant(data.batch(batch)?);
        let graph = forward_graph(&mut tape, params, &bound, arch, input, NormMode::Batch)?;
        for (norm, (key, mean, var)) in graph.norms.iter().zip(collect_stats(&tape, &graph.norms)) {
            let shape = tape.value(norm.output).shape();
            let n = (shape[0] * shape[2] * shape[3]) as f64;
            let entry = acc
                .entry(key)
                .or_insert_with(|| (vec![0.0; mean.len()], vec![0.0; mean.len()], 0.0));
            for c in 0..mean.len() {
                entry.0[c] += n * mean[c];
                entry.1[c] += n * (var[c] + mean[c] * mean[c]);
            }
            entry.2 += n;
        }
    }
    for (key, (sum, sq, n)) in acc {
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let var: Vec<f64> = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0)).collect();
        for (suffix, values) in [("mean", mean), ("var", var)] {
            let name = format!("{key}.{suffix}");
            params
                .get_mut(&name)
                .ok_or_else(|| Error::InvalidState(format!("missing parameter {name}")))?
                .data_mut()
                .copy_from_slice(&values);
        }
    }
    Ok(())
}
