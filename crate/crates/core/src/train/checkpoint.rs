use std::collections::BTreeMap;
use std::path::Path;

use crate::arch::{ArchSpec, ModelParams};
use crate::binio::{Reader, Writer};
use crate::dataset::LabelSpace;
use crate::hash::hash64;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"VRIDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained network with the metadata needed to use it.
///
/// File layout, all integers little-endian:
///
/// ```text
/// magic      8 bytes  "VRIDCKPT"
/// version    u32
/// arch       u32 length + UTF-8 TOML (ArchSpec::to_text)
/// seed       u64
/// step       u64
/// config     u64      TrainConfig::hash
/// labels     u32 length + UTF-8 JSON label space
/// count      u32
/// count ×    u32 length + UTF-8 key, u32 rank, rank × u64 extents,
///            product(extents) × f64 elements
/// ```
///
/// Records appear in key order, so equal checkpoints have equal bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchSpec,
    pub params: ModelParams,
    pub labels: LabelSpace,
    pub seed: u64,
    pub step: u64,
    pub config_hash: u64,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.params.check_against(&self.arch)?;
        if self.labels.len() != self.arch.classes() {
            return Err(Error::InvalidState(format!(
                "label space has {} entries, head has {} classes",
                self.labels.len(),
                self.arch.classes()
            )));
        }
        Ok(())
    }

    /// Digest of the label space; indexes built from this checkpoint carry it.
    pub fn label_hash(&self) -> u64 {
        hash64(self.labels.to_json().as_bytes())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut w = Writer::default();
        w.raw(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.bytes_u32(self.arch.to_text().as_bytes())?;
        w.u64(self.seed);
        w.u64(self.step);
        w.u64(self.config_hash);
        w.bytes_u32(self.labels.to_json().as_bytes())?;
        w.len_u32(self.params.len())?;
        for (key, t) in self.params.iter() {
            w.bytes_u32(key.as_bytes())?;
            w.tensor(t)?;
        }
        Ok(w.bytes)
    }

    /// `path` only labels error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.raw(8)? != CHECKPOINT_MAGIC {
            return r.fail("not a checkpoint (bad magic)");
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let arch = ArchSpec::from_text(&r.string_u32()?)?;
        let seed = r.u64()?;
        let step = r.u64()?;
        let config_hash = r.u64()?;
        let labels: LabelSpace = match serde_json::from_str(&r.string_u32()?) {
            Ok(l) => l,
            Err(e) => return r.fail(format!("label space: {e}")),
        };
        let count = r.u32()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let key = r.string_u32()?;
            let t = r.tensor()?;
            if tensors.insert(key.clone(), t).is_some() {
                return r.fail(format!("duplicate parameter {key}"));
            }
        }
        r.finish()?;
        let ckpt = Self {
            arch,
            params: ModelParams::from_map(tensors),
            labels,
            seed,
            step,
            config_hash,
        };
        ckpt.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
