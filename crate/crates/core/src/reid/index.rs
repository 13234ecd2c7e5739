use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BestShotRecord, ColorScore, MakeModelScore};
use crate::binio::{Reader, Writer};
use crate::dataset::LabelSpace;
use crate::hash::hash64;
use crate::{Error, Result};

pub const INDEX_MAGIC: [u8; 8] = *b"VRIDINDX";
pub const INDEX_VERSION: u32 = 1;

/// Label spaces the index was classified against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexLabels {
    pub makemodel: LabelSpace,
    pub color: LabelSpace,
}

impl IndexLabels {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }

    /// Equals [`crate::train::Checkpoint::label_hash`] of the make/model
    /// checkpoint, so an index can be checked against it.
    pub fn hash(&self) -> u64 {
        hash64(self.makemodel.to_json().as_bytes())
    }
}

/// Classified best-shots, immutable once built.
///
/// File layout (little-endian), following the checkpoint conventions:
///
/// ```text
/// magic       8 bytes "VRIDINDX"
/// version     u32
/// label hash  u64
/// labels      u32 length + UTF-8 JSON (make/model and color label spaces)
/// count       u32
/// count ×     id, source      u32 length + UTF-8 each
///             timestamp       u8 flag, then u32 length + UTF-8 when 1
///             descriptor      u32 dimension, f64 values
///             top-k           u32 k, then k × (u64 classid, make, model, f64 score)
///             color           u64 index, name, f64 score
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    labels: IndexLabels,
    records: Vec<BestShotRecord>,
}

impl Index {
    pub fn new(labels: IndexLabels, records: Vec<BestShotRecord>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Data(format!("duplicate record id {:?}", r.id)));
            }
            if r.makemodel.is_empty() {
                return Err(Error::Data(format!("record {:?} has no make/model scores", r.id)));
            }
        }
        Ok(Self { labels, records })
    }

    pub fn labels(&self) -> &IndexLabels {
        &self.labels
    }

    pub fn label_hash(&self) -> u64 {
        self.labels.hash()
    }

    pub fn records(&self) -> &[BestShotRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.raw(&INDEX_MAGIC);
        w.u32(INDEX_VERSION);
        w.u64(self.label_hash());
        w.bytes_u32(self.labels.to_json().as_bytes())?;
        w.len_u32(self.records.len())?;
        for r in &self.records {
            w.bytes_u32(r.id.as_bytes())?;
            w.bytes_u32(r.source.as_bytes())?;
            match &r.timestamp {
                Some(t) => {
                    w.raw(&[1]);
                    w.bytes_u32(t.as_bytes())?;
                }
                None => w.raw(&[0]),
            }
            w.len_u32(r.descriptor.len())?;
            r.descriptor.iter().for_each(|&v| w.f64(v));
            w.len_u32(r.makemodel.len())?;
            for m in &r.makemodel {
                w.u64(m.classid as u64);
                w.bytes_u32(m.make.as_bytes())?;
                w.bytes_u32(m.model.as_bytes())?;
                w.f64(m.score);
            }
            w.u64(r.color.index as u64);
            w.bytes_u32(r.color.color.as_bytes())?;
            w.f64(r.color.score);
        }
        Ok(w.bytes)
    }

    /// `path` only labels error messages. With `expected_hash`, an index
    /// built against another label space is rejected.
    pub fn from_bytes(bytes: &[u8], path: &Path, expected_hash: Option<u64>) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.raw(8)? != INDEX_MAGIC {
            return r.fail("not an index (bad magic)");
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::Version {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let hash = r.u64()?;
        if let Some(expected) = expected_hash {
            if expected != hash {
                return Err(Error::Incompatible {
                    expected: format!("label space {expected:016x}"),
                    found: format!("index label space {hash:016x}"),
                });
            }
        }
        let labels: IndexLabels = match serde_json::from_str(&r.string_u32()?) {
            Ok(l) => l,
            Err(e) => return r.fail(format!("labels: {e}")),
        };
        if labels.hash() != hash {
            return r.fail(format!("stored hash {hash:016x} does not match embedded labels {:016x}", labels.hash()));
        }
        let count = r.u32()?;
        let mut records = Vec::new();
        for _ in 0..count {
            let id = r.string_u32()?;
            let source = r.string_u32()?;
            let timestamp = match r.raw(1)?[0] {
                0 => None,
                1 => Some(r.string_u32()?),
                f => return r.fail(format!("bad timestamp flag {f}")),
            };
            let d = r.u32()? as usize;
            if d > bytes.len() / 8 {
                return r.fail(format!("descriptor length {d} exceeds file"));
            }
            let descriptor = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let k = r.u32()? as usize;
            if k > bytes.len() / 8 {
                return r.fail(format!("top-k length {k} exceeds file"));
            }
            let mut makemodel = Vec::with_capacity(k);
            for _ in 0..k {
                makemodel.push(MakeModelScore {
                    classid: r.u64()? as usize,
                    make: r.string_u32()?,
                    model: r.string_u32()?,
                    score: r.f64()?,
                });
            }
            let color = ColorScore {
                index: r.u64()? as usize,
                color: r.string_u32()?,
                score: r.f64()?,
            };
            records.push(BestShotRecord {
                id,
                source,
                timestamp,
                descriptor,
                makemodel,
                color,
            });
        }
        r.finish()?;
        Self::new(labels, records).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::train::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path, expected_hash: Option<u64>) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path, expected_hash)
    }
}
