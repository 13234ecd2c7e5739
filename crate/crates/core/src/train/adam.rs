use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arch::{layout, ArchSpec, ModelParams};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad Adam settings {self:?}")))
        }
    }
}

/// Step count and per-parameter first/second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    /// Zero moments for `keys`, shaped like the matching tensors of `params`.
    pub fn new<'k>(config: AdamConfig, params: &ModelParams, keys: impl IntoIterator<Item = &'k str>) -> Result<Self> {
        config.validate()?;
        let mut m = BTreeMap::new();
        for key in keys {
            let t = params
                .get(key)
                .ok_or_else(|| Error::InvalidState(format!("no parameter {key} to optimize")))?;
            m.insert(key.to_string(), vec![0.0; t.len()]);
        }
        Ok(Self {
            config,
            t: 0,
            v: m.clone(),
            m,
        })
    }

    /// Moments for every trainable tensor of `arch`.
    pub fn for_arch(config: AdamConfig, params: &ModelParams, arch: &ArchSpec) -> Result<Self> {
        let slots = layout(arch)?;
        Self::new(config, params, slots.iter().filter(|s| s.role.trainable()).map(|s| s.key.as_str()))
    }

    pub fn moments(&self, key: &str) -> Option<(&[f64], &[f64])> {
        Some((self.m.get(key)?, self.v.get(key)?))
    }

    /// One bias-corrected update of every tracked parameter.
    pub fn step(&mut self, params: &mut ModelParams, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        for (key, m) in &self.m {
            let g = grads
                .get(key)
                .ok_or_else(|| Error::InvalidState(format!("missing gradient for {key}")))?;
            if g.len() != m.len() {
                return Err(Error::InvalidState(format!("gradient for {key} has {} elements, want {}", g.len(), m.len())));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (key, m) in &mut self.m {
            let v = self.v.get_mut(key).expect("moments share keys");
            let w = params
                .get_mut(key)
                .ok_or_else(|| Error::InvalidState(format!("parameter {key} disappeared")))?
                .data_mut();
            for (((w, m), v), &g) in w.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads[key].data()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / c1;
                let denom = (*v / c2).sqrt() + eps;
                if mhat != 0.0 {
                    *w -= lr * mhat / denom;
                }
            }
        }
        Ok(())
    }
}
