//! Versioned binary container of named `f32` tensors plus a JSON header.
//!
//! ```text
//! magic        8 bytes  "CTCNCKPT"
//! version      u32      1
//! header_len   u32
//! header       header_len bytes of UTF-8 JSON
//! count        u32      number of tensors
//! repeated, names in lexicographic order:
//!   name_len   u32
//!   name       name_len bytes UTF-8
//!   len        u64      element count
//!   data       len x f32
//! checksum     u64      FNV-1a of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use crate::binio::{fnv1a64, Cursor};
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"CTCNCKPT";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorArchive {
    pub header: serde_json::Value,
    pub tensors: BTreeMap<String, Vec<f32>>,
}

impl TensorArchive {
    pub fn new(header: serde_json::Value) -> Self {
        Self { header, tensors: BTreeMap::new() }
    }

    /// Stores `values` at `f32` precision.
    pub fn insert(&mut self, name: impl Into<String>, values: &[f64]) {
        self.tensors.insert(name.into(), values.iter().map(|&v| v as f32).collect());
    }

    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.tensors.get(name).map(Vec::as_slice)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("JSON values always serialize");
        let mut out = Vec::new();
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, data) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m.to_string());
        if bytes.len() < 8 + 4 + 8 {
            return Err(bad("file too short"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let mut c = Cursor::new(body);
        if c.take(8) != Some(ARCHIVE_MAGIC.as_slice()) {
            return Err(bad("bad magic, not a checkpoint"));
        }
        let version = c.u32().ok_or_else(|| bad("truncated"))?;
        if version != ARCHIVE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if stored != fnv1a64(body) {
            return Err(bad("checksum mismatch"));
        }
        let header_len = c.u32().ok_or_else(|| bad("truncated"))? as usize;
        let header_bytes = c.take(header_len).ok_or_else(|| bad("truncated header"))?;
        let header: serde_json::Value =
            serde_json::from_slice(header_bytes).map_err(|e| bad(&format!("header: {e}")))?;
        let count = c.u32().ok_or_else(|| bad("truncated"))?;
        let mut tensors = BTreeMap::new();
        let mut previous: Option<String> = None;
        for _ in 0..count {
            let n = c.u32().ok_or_else(|| bad("truncated tensor name"))? as usize;
            let name = c.take(n).ok_or_else(|| bad("truncated tensor name"))?;
            let name = String::from_utf8(name.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
            if previous.as_ref().is_some_and(|p| p >= &name) {
                return Err(bad("tensor names not in lexicographic order"));
            }
            let len = c.u64().ok_or_else(|| bad("truncated tensor"))? as usize;
            if c.remaining() < len.saturating_mul(4) {
                return Err(bad(&format!("tensor {name} truncated")));
            }
            let data = (0..len).map(|_| c.f32().unwrap()).collect();
            previous = Some(name.clone());
            tensors.insert(name, data);
        }
        if c.remaining() != 0 {
            return Err(bad("trailing bytes after last tensor"));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorArchive {
        let mut a = TensorArchive::new(serde_json::json!({"iteration": 3}));
        a.insert("b", &[1.0, -2.5]);
        a.insert("a", &[0.125]);
        a
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = sample();
        let bytes = a.to_bytes();
        let b = TensorArchive::from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes, b.to_bytes());
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = sample().to_bytes();
        let n = bytes.len();
        bytes[n - 12] ^= 1;
        assert!(TensorArchive::from_bytes(&bytes, Path::new("x")).is_err());
        assert!(TensorArchive::from_bytes(&bytes[..n - 5], Path::new("x")).is_err());
    }
}
