//! One walk over an [`ArchSpec`] drives both parameter enumeration and the
//! forward pass, so the two can never disagree about keys or shapes.

use std::collections::BTreeMap;

use vehreid_tensor::ops::norm::ChannelStats;
use vehreid_tensor::{Tape, Var};

use super::params::{ModelParams, ParamRole, ParamSlot};
use super::spec::{ArchSpec, Body, InceptionSpec, InceptionVariant, StemActivation};
use crate::{Error, Result};

pub(crate) trait Builder {
    type V: Copy;
    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, key: &str, x: Self::V, cin: usize, cout: usize, k: usize, stride: usize, pad: usize) -> Result<Self::V>;
    fn norm(&mut self, key: &str, x: Self::V, channels: usize) -> Result<Self::V>;
    fn elu(&mut self, x: Self::V) -> Result<Self::V>;
    fn relu(&mut self, x: Self::V) -> Result<Self::V>;
    fn maxpool(&mut self, x: Self::V, k: usize, stride: usize, pad: usize) -> Result<Self::V>;
    fn add(&mut self, a: Self::V, b: Self::V) -> Result<Self::V>;
    fn concat(&mut self, parts: &[Self::V]) -> Result<Self::V>;
    fn global_pool(&mut self, x: Self::V) -> Result<Self::V>;
    fn dense(&mut self, key: &str, x: Self::V, din: usize, dout: usize) -> Result<Self::V>;
}

/// Output handles of a walk.
pub(crate) struct Walked<V> {
    pub logits: V,
    pub features: V,
}

/// A built inception module: four parallel branches (1×1; 1×1→3×3;
/// 1×1→5×5; 3×3 max pool→1×1) concatenated along channels. Spatial size is
/// preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InceptionBlock {
    spec: InceptionSpec,
}

pub fn build_inception(spec: InceptionSpec) -> Result<InceptionBlock> {
    spec.validate()?;
    Ok(InceptionBlock { spec })
}

impl InceptionBlock {
    pub fn spec(&self) -> &InceptionSpec {
        &self.spec
    }

    pub fn out_channels(&self) -> usize {
        self.spec.out_channels()
    }

    pub(crate) fn apply<B: Builder>(&self, b: &mut B, prefix: &str, x: B::V, cin: usize) -> Result<B::V> {
        let s = &self.spec;
        let unit = |b: &mut B, name: &str, x: B::V, cin: usize, cout: usize, k: usize| -> Result<B::V> {
            let key = format!("{prefix}.{name}");
            let y = b.conv(&format!("{key}.conv"), x, cin, cout, k, 1, k / 2)?;
            match s.variant {
                InceptionVariant::Original => b.relu(y),
                InceptionVariant::Modified => {
                    let z = b.norm(&format!("{key}.norm"), y, cout)?;
                    b.elu(z)
                }
            }
        };
        let b1 = unit(b, "b1", x, cin, s.c1, 1)?;
        let r3 = unit(b, "b3r", x, cin, s.c3r, 1)?;
        let b3 = unit(b, "b3", r3, s.c3r, s.c3, 3)?;
        let r5 = unit(b, "b5r", x, cin, s.c5r, 1)?;
        let b5 = unit(b, "b5", r5, s.c5r, s.c5, 5)?;
        let pooled = b.maxpool(x, 3, 1, 1)?;
        let bp = unit(b, "bp", pooled, cin, s.cp, 1)?;
        b.concat(&[b1, b3, b5, bp])
    }
}

/// Pre-activation residual block: `x ↦ conv2(elu(norm2(conv1(elu(norm1(x)))))) + shortcut(x)`
/// where the shortcut is the identity, or a strided 1×1 projection when the
/// width or resolution changes.
fn residual_block<B: Builder>(b: &mut B, prefix: &str, x: B::V, cin: usize, width: usize, stride: usize) -> Result<B::V> {
    let h = b.norm(&format!("{prefix}.norm1"), x, cin)?;
    let h = b.elu(h)?;
    let h = b.conv(&format!("{prefix}.conv1"), h, cin, width, 3, stride, 1)?;
    let h = b.norm(&format!("{prefix}.norm2"), h, width)?;
    let h = b.elu(h)?;
    let h = b.conv(&format!("{prefix}.conv2"), h, width, width, 3, 1, 1)?;
    let shortcut = if stride != 1 || cin != width {
        b.conv(&format!("{prefix}.shortcut"), x, cin, width, 1, stride, 0)?
    } else {
        x
    };
    b.add(h, shortcut)
}

pub(crate) fn walk<B: Builder>(arch: &ArchSpec, b: &mut B, input: B::V) -> Result<Walked<B::V>> {
    let stem = &arch.stem;
    let mut x = b.conv("stem.conv", input, arch.input.channels, stem.width, stem.kernel, stem.stride, stem.kernel / 2)?;
    x = match stem.activation {
        StemActivation::None => x,
        StemActivation::Relu => b.relu(x)?,
        StemActivation::ZnormElu => {
            let z = b.norm("stem.norm", x, stem.width)?;
            b.elu(z)?
        }
    };
    if stem.pool {
        x = b.maxpool(x, 2, 2, 0)?;
    }
    let mut channels = stem.width;
    match &arch.body {
        Body::ResidualNet { stages } => {
            for (si, stage) in stages.iter().enumerate() {
                for bi in 0..stage.blocks {
                    let stride = if bi == 0 { stage.stride } else { 1 };
                    x = residual_block(b, &format!("stage{si}.block{bi}"), x, channels, stage.width, stride)?;
                    channels = stage.width;
                }
            }
            x = b.norm("final.norm", x, channels)?;
            x = b.elu(x)?;
        }
        Body::InceptionNet { stages } => {
            for (si, stage) in stages.iter().enumerate() {
                if stage.downsample {
                    x = b.maxpool(x, 2, 2, 0)?;
                }
                for (bi, spec) in stage.blocks.iter().enumerate() {
                    let block = build_inception(*spec)?;
                    x = block.apply(b, &format!("stage{si}.block{bi}"), x, channels)?;
                    channels = block.out_channels();
                }
            }
        }
    }
    let features = b.global_pool(x)?;
    let logits = b.dense("head", features, channels, arch.classes())?;
    Ok(Walked { logits, features })
}

#[derive(Default)]
pub(crate) struct LayoutBuilder {
    pub slots: Vec<ParamSlot>,
}

impl LayoutBuilder {
    fn slot(&mut self, key: String, shape: Vec<usize>, role: ParamRole) {
        self.slots.push(ParamSlot { key, shape, role });
    }
}

impl Builder for LayoutBuilder {
    type V = ();
    fn conv(&mut self, key: &str, _: (), cin: usize, cout: usize, k: usize, _: usize, _: usize) -> Result<()> {
        self.slot(format!("{key}.weight"), vec![cout, cin, k, k], ParamRole::ConvWeight { fan_in: cin * k * k });
        self.slot(format!("{key}.bias"), vec![cout], ParamRole::Bias);
        Ok(())
    }
    fn norm(&mut self, key: &str, _: (), channels: usize) -> Result<()> {
        self.slot(format!("{key}.mean"), vec![channels], ParamRole::NormMean);
        self.slot(format!("{key}.var"), vec![channels], ParamRole::NormVar);
        Ok(())
    }
    fn elu(&mut self, _: ()) -> Result<()> {
        Ok(())
    }
    fn relu(&mut self, _: ()) -> Result<()> {
        Ok(())
    }
    fn maxpool(&mut self, _: (), _: usize, _: usize, _: usize) -> Result<()> {
        Ok(())
    }
    fn add(&mut self, _: (), _: ()) -> Result<()> {
        Ok(())
    }
    fn concat(&mut self, _: &[()]) -> Result<()> {
        Ok(())
    }
    fn global_pool(&mut self, _: ()) -> Result<()> {
        Ok(())
    }
    fn dense(&mut self, key: &str, _: (), din: usize, dout: usize) -> Result<()> {
        self.slot(format!("{key}.weight"), vec![din, dout], ParamRole::DenseWeight { fan_in: din });
        self.slot(format!("{key}.bias"), vec![dout], ParamRole::Bias);
        Ok(())
    }
}

/// How z-normalization layers obtain their statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Statistics of the current batch (training).
    Batch,
    /// Stored running statistics (inference; batch independent).
    Running,
}

/// A z-normalization node recorded during a walk.
#[derive(Debug, Clone)]
pub struct NormRecord {
    /// Parameter prefix, e.g. `stage0.block1.norm2`.
    pub key: String,
    pub output: Var,
}

pub(crate) struct TapeBuilder<'a> {
    pub tape: &'a mut Tape,
    pub params: &'a ModelParams,
    pub bound: &'a BTreeMap<String, Var>,
    pub mode: NormMode,
    pub epsilon: f64,
    pub alpha: f64,
    pub norms: Vec<NormRecord>,
}

impl TapeBuilder<'_> {
    fn var(&self, key: &str) -> Result<Var> {
        self.bound
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidState(format!("missing parameter {key}")))
    }

    fn stored(&self, key: &str) -> Result<Vec<f64>> {
        self.params
            .get(key)
            .map(|t| t.data().to_vec())
            .ok_or_else(|| Error::InvalidState(format!("missing parameter {key}")))
    }
}

impl Builder for TapeBuilder<'_> {
    type V = Var;
    fn conv(&mut self, key: &str, x: Var, _: usize, _: usize, _: usize, stride: usize, pad: usize) -> Result<Var> {
        let w = self.var(&format!("{key}.weight"))?;
        let bias = self.var(&format!("{key}.bias"))?;
        Ok(self.tape.conv2d(x, w, bias, stride, pad)?)
    }
    fn norm(&mut self, key: &str, x: Var, _: usize) -> Result<Var> {
        let out = match self.mode {
            NormMode::Batch => self.tape.znorm(x, self.epsilon)?,
            NormMode::Running => {
                let stats = ChannelStats {
                    mean: self.stored(&format!("{key}.mean"))?,
                    var: self.stored(&format!("{key}.var"))?,
                };
                self.tape.standardize(x, stats, self.epsilon)?
            }
        };
        self.norms.push(NormRecord {
            key: key.to_string(),
            output: out,
        });
        Ok(out)
    }
    fn elu(&mut self, x: Var) -> Result<Var> {
        Ok(self.tape.elu(x, self.alpha)?)
    }
    fn relu(&mut self, x: Var) -> Result<Var> {
        Ok(self.tape.relu(x))
    }
    fn maxpool(&mut self, x: Var, k: usize, stride: usize, pad: usize) -> Result<Var> {
        Ok(self.tape.maxpool(x, k, stride, pad)?)
    }
    fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        Ok(self.tape.add(a, b)?)
    }
    fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        Ok(self.tape.concat_channels(parts)?)
    }
    fn global_pool(&mut self, x: Var) -> Result<Var> {
        Ok(self.tape.global_avg_pool(x)?)
    }
    fn dense(&mut self, key: &str, x: Var, _: usize, _: usize) -> Result<Var> {
        let w = self.var(&format!("{key}.weight"))?;
        let b = self.var(&format!("{key}.bias"))?;
        Ok(self.tape.dense(x, w, b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn wavy(len: usize, salt: f64) -> Vec<f64> {
        (0..len).map(|i| ((i as f64 + salt) * 0.731).sin()).collect()
    }

    /// Parameters for `slots`, bound on `tape`. `zero` picks slots filled with 0.
    fn bind(tape: &mut Tape, slots: &[ParamSlot], zero: impl Fn(&str) -> bool) -> (ModelParams, BTreeMap<String, Var>) {
        let mut tensors = BTreeMap::new();
        let mut bound = BTreeMap::new();
        for (i, s) in slots.iter().enumerate() {
            let n: usize = s.shape.iter().product();
            let data = if zero(&s.key) { vec![0.0; n] } else { wavy(n, i as f64) };
            let t = Tensor::new(s.shape.clone(), data).unwrap();
            bound.insert(s.key.clone(), tape.leaf(t.clone(), false));
            tensors.insert(s.key.clone(), t);
        }
        (ModelParams::from_map(tensors), bound)
    }

    #[test]
    fn zeroed_transform_makes_block_identity() {
        let mut layout = LayoutBuilder::default();
        residual_block(&mut layout, "b", (), 4, 4, 1).unwrap();
        let mut tape = Tape::new();
        let (params, bound) = bind(&mut tape, &layout.slots, |k| k.starts_with("b.conv2"));
        let x = Tensor::new(vec![2, 4, 6, 6], wavy(288, 0.3)).unwrap();
        let input = tape.constant(x.clone());
        let mut b = TapeBuilder {
            tape: &mut tape,
            params: &params,
            bound: &bound,
            mode: NormMode::Batch,
            epsilon: 1e-5,
            alpha: 1.0,
            norms: Vec::new(),
        };
        let y = residual_block(&mut b, "b", input, 4, 4, 1).unwrap();
        assert_eq!(tape.value(y).data(), x.data());
    }

    fn run_inception(variant: InceptionVariant) -> (Tape, Var, Vec<NormRecord>) {
        let block = build_inception(InceptionSpec::new([8, 4, 16, 2, 8, 8], variant)).unwrap();
        let mut layout = LayoutBuilder::default();
        block.apply(&mut layout, "i", (), 3).unwrap();
        let mut tape = Tape::new();
        let (params, bound) = bind(&mut tape, &layout.slots, |_| false);
        let input = tape.constant(Tensor::new(vec![2, 3, 7, 5], wavy(210, 1.7)).unwrap());
        let mut b = TapeBuilder {
            tape: &mut tape,
            params: &params,
            bound: &bound,
            mode: NormMode::Batch,
            epsilon: 1e-5,
            alpha: 1.0,
            norms: Vec::new(),
        };
        let y = block.apply(&mut b, "i", input, 3).unwrap();
        let norms = b.norms;
        (tape, y, norms)
    }

    #[test]
    fn inception_keeps_spatial_size_and_sums_widths() {
        for variant in [InceptionVariant::Original, InceptionVariant::Modified] {
            let (tape, y, _) = run_inception(variant);
            assert_eq!(tape.value(y).shape(), &[2, 40, 7, 5]);
        }
    }

    #[test]
    fn modified_inception_normalizes_every_convolution() {
        let (tape, _, norms) = run_inception(InceptionVariant::Modified);
        assert_eq!(norms.len(), 6);
        for n in &norms {
            let t = tape.value(n.output);
            let (b, c, hw) = (t.shape()[0], t.shape()[1], t.shape()[2] * t.shape()[3]);
            for ch in 0..c {
                let sum: f64 = (0..b).flat_map(|i| t.data()[(i * c + ch) * hw..(i * c + ch + 1) * hw].iter()).sum();
                assert!((sum / (b * hw) as f64).abs() < 1e-9, "{} channel {ch}", n.key);
            }
        }
    }

    #[test]
    fn original_inception_has_no_znorm() {
        let (tape, _, norms) = run_inception(InceptionVariant::Original);
        assert!(norms.is_empty());
        assert_eq!(tape.count_znorm(), 0);
    }
}
