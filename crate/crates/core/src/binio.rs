//! Little-endian container plumbing shared by checkpoint and index files.

use std::path::{Path, PathBuf};

use crate::{Error, Result, Tensor};

#[derive(Debug, Default)]
pub(crate) struct Writer {
    pub bytes: Vec<u8>,
}

impl Writer {
    pub fn raw(&mut self, b: &[u8]) {
        self.bytes.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.raw(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.raw(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.raw(&v.to_le_bytes());
    }

    pub fn len_u32(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("length {n} exceeds u32")))?;
        self.u32(n);
        Ok(())
    }

    pub fn bytes_u32(&mut self, b: &[u8]) -> Result<()> {
        self.len_u32(b.len())?;
        self.raw(b);
        Ok(())
    }

    /// rank u32, extents u64 each, elements f64.
    pub fn tensor(&mut self, t: &Tensor) -> Result<()> {
        self.len_u32(t.rank())?;
        for &e in t.shape() {
            self.u64(e as u64);
        }
        for &v in t.data() {
            self.f64(v);
        }
        Ok(())
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], path: &Path) -> Self {
        Self {
            bytes,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    pub fn fail<T>(&self, msg: impl std::fmt::Display) -> Result<T> {
        Err(Error::format(&self.path, format!("at byte {}: {msg}", self.pos)))
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!("truncated, wanted {n} more bytes"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.raw(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.raw(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.raw(8)?.try_into().expect("8 bytes")))
    }

    pub fn bytes_u32(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.raw(n)
    }

    pub fn string_u32(&mut self) -> Result<String> {
        let b = self.bytes_u32()?;
        match std::str::from_utf8(b) {
            Ok(s) => Ok(s.to_string()),
            Err(e) => self.fail(format!("invalid UTF-8: {e}")),
        }
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return self.fail(format!("implausible rank {rank}"));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
        let n = match n {
            Some(n) if n.checked_mul(8).is_some_and(|b| b <= self.bytes.len() - self.pos) => n,
            _ => return self.fail(format!("shape {shape:?} exceeds remaining data")),
        };
        let data = self.raw(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        match Tensor::new(shape, data) {
            Ok(t) => Ok(t),
            Err(e) => self.fail(e),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }
}
