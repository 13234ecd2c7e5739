use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vehreid_tensor::{Tape, Tensor, Var};

use super::graph::{walk, LayoutBuilder};
use super::spec::ArchSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    ConvWeight { fan_in: usize },
    DenseWeight { fan_in: usize },
    Bias,
    /// Running per-channel mean of a z-normalization layer.
    NormMean,
    /// Running per-channel variance of a z-normalization layer.
    NormVar,
}

impl ParamRole {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamRole::NormMean | ParamRole::NormVar)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlot {
    pub key: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
}

/// Every tensor an architecture needs, in forward order.
pub fn layout(arch: &ArchSpec) -> Result<Vec<ParamSlot>> {
    arch.validate()?;
    let mut builder = LayoutBuilder::default();
    walk(arch, &mut builder, ())?;
    Ok(builder.slots)
}

/// Learned weights and normalization statistics keyed by parameter path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParams {
    pub fn from_map(tensors: BTreeMap<String, Tensor>) -> Self {
        Self { tensors }
    }

    pub fn get(&self, key: &str) -> Option<&Tensor> {
        self.tensors.get(key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(key)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: Tensor) -> Option<Tensor> {
        self.tensors.insert(key.into(), value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Verifies the key set and shapes against the architecture.
    pub fn check_against(&self, arch: &ArchSpec) -> Result<()> {
        let slots = layout(arch)?;
        for slot in &slots {
            match self.tensors.get(&slot.key) {
                None => return Err(Error::InvalidState(format!("missing parameter {}", slot.key))),
                Some(t) if t.shape() != slot.shape.as_slice() => {
                    return Err(Error::InvalidState(format!(
                        "parameter {} has shape {:?}, expected {:?}",
                        slot.key,
                        t.shape(),
                        slot.shape
                    )))
                }
                _ => {}
            }
        }
        if slots.len() != self.tensors.len() {
            let known: std::collections::BTreeSet<_> = slots.iter().map(|s| s.key.as_str()).collect();
            let orphan = self.tensors.keys().find(|k| !known.contains(k.as_str()));
            return Err(Error::InvalidState(format!("orphan parameter {orphan:?}")));
        }
        Ok(())
    }

    /// Records every trainable tensor as a tape leaf.
    pub fn bind(&self, tape: &mut Tape, arch: &ArchSpec, requires_grad: bool) -> Result<BTreeMap<String, Var>> {
        let mut vars = BTreeMap::new();
        for slot in layout(arch)? {
            if !slot.role.trainable() {
                continue;
            }
            let t = self
                .tensors
                .get(&slot.key)
                .ok_or_else(|| Error::InvalidState(format!("missing parameter {}", slot.key)))?;
            vars.insert(slot.key, tape.leaf(t.clone(), requires_grad));
        }
        Ok(vars)
    }
}

/// Fresh parameters for `arch`.
///
/// Weights are drawn uniformly from `±sqrt(6/fan_in)` for convolutions and
/// `±sqrt(3/fan_in)` for the dense head; biases and running means start at 0,
/// running variances at 1. One ChaCha8 stream seeded with `seed` is consumed
/// in layout order, so the result is a pure function of `(arch, seed)`.
pub fn build(arch: &ArchSpec, seed: u64) -> Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for slot in layout(arch)? {
        let n: usize = slot.shape.iter().product();
        let data = match slot.role {
            ParamRole::ConvWeight { fan_in } => uniform(&mut rng, n, (6.0 / fan_in as f64).sqrt()),
            ParamRole::DenseWeight { fan_in } => uniform(&mut rng, n, (3.0 / fan_in as f64).sqrt()),
            ParamRole::Bias | ParamRole::NormMean => vec![0.0; n],
            ParamRole::NormVar => vec![1.0; n],
        };
        tensors.insert(slot.key, Tensor::new(slot.shape, data)?);
    }
    Ok(ModelParams { tensors })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}
