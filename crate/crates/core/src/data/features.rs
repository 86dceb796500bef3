//! Labeled feature sequences and the `CTCNFEAT` binary feature format.
//!
//! ```text
//! magic     8 bytes  "CTCNFEAT"
//! version   u32      1
//! frames    u32      T
//! dim       u32      D
//! fps       f32
//! features  T x D f32, row-major
//! checksum  u64      FNV-1a of every preceding byte
//! ```
//!
//! All fields are little-endian.

use std::path::Path;

use super::LabelClass;
use crate::binio::{fnv1a64, Cursor};
use crate::error::{Error, Result};
use crate::seqcore::SeqMatrix;

pub const FEATURE_MAGIC: &[u8; 8] = b"CTCNFEAT";
pub const FEATURE_VERSION: u32 = 1;

/// Per-frame features of one video with aligned labels and evaluation mask.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub video_id: String,
    pub fps: f64,
    pub features: SeqMatrix,
    pub labels: Vec<LabelClass>,
    /// False on frames that must not reach a loss or a metric.
    pub mask: Vec<bool>,
}

impl FeatureSequence {
    /// Builds a sequence whose mask excludes `Uncertain` frames.
    pub fn new(video_id: impl Into<String>, fps: f64, features: SeqMatrix, labels: Vec<LabelClass>) -> Result<Self> {
        let mask = labels.iter().map(|l| l.is_target()).collect();
        let seq = Self { video_id: video_id.into(), fps, features, labels, mask };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.features.rows();
        if self.labels.len() != t || self.mask.len() != t {
            return Err(Error::shape(format!(
                "{}: {t} feature rows, {} labels, {} mask entries",
                self.video_id,
                self.labels.len(),
                self.mask.len()
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::data(format!("{}: fps {} must be positive", self.video_id, self.fps)));
        }
        if self.labels.iter().zip(&self.mask).any(|(l, &m)| m && !l.is_target()) {
            return Err(Error::data(format!("{}: uncertain frame left unmasked", self.video_id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Label indices as loss and metric targets.
    pub fn targets(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }

    /// Keeps frames `indices` of features, labels and mask alike.
    pub fn select(&self, indices: &[usize], fps: f64) -> Self {
        Self {
            video_id: self.video_id.clone(),
            fps,
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            mask: indices.iter().map(|&i| self.mask[i]).collect(),
        }
    }

    /// Frame counts per target class over unmasked frames.
    pub fn class_counts(&self) -> [u64; 9] {
        let mut counts = [0; 9];
        for (l, &m) in self.labels.iter().zip(&self.mask) {
            if m {
                counts[l.index()] += 1;
            }
        }
        counts
    }
}

/// Contents of a feature file.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub fps: f32,
    pub features: SeqMatrix,
}

pub fn encode_features(fps: f64, features: &SeqMatrix) -> Result<Vec<u8>> {
    let (t, d) = features.shape();
    let t32 = u32::try_from(t).map_err(|_| Error::shape(format!("{t} frames exceed the format limit")))?;
    let d32 = u32::try_from(d).map_err(|_| Error::shape(format!("dimension {d} exceeds the format limit")))?;
    let mut out = Vec::with_capacity(28 + 4 * t * d + 8);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&t32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    out.extend_from_slice(&(fps as f32).to_le_bytes());
    for &v in features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureFile> {
    let bad = |m: String| Error::format(path, m);
    if bytes.len() < 8 || &bytes[..8] != FEATURE_MAGIC {
        return Err(bad("bad magic, not a CTCNFEAT file".into()));
    }
    let mut c = Cursor::new(&bytes[8..]);
    let version = c.u32().ok_or_else(|| bad("truncated header".into()))?;
    if version != FEATURE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (t, d, fps) = match (c.u32(), c.u32(), c.f32()) {
        (Some(t), Some(d), Some(fps)) => (t as usize, d as usize, fps),
        _ => return Err(bad("truncated header".into())),
    };
    let payload = t.checked_mul(d).and_then(|n| n.checked_mul(4)).ok_or_else(|| bad("frame count overflows".into()))?;
    if c.remaining() < payload + 8 {
        return Err(bad(format!("truncated: {t}x{d} features need {} more bytes", payload + 8 - c.remaining())));
    }
    if c.remaining() > payload + 8 {
        return Err(bad("trailing bytes after checksum".into()));
    }
    let body_len = 8 + c.position() + payload;
    let stored = u64::from_le_bytes(bytes[body_len..].try_into().unwrap());
    if stored != fnv1a64(&bytes[..body_len]) {
        return Err(bad("checksum mismatch".into()));
    }
    let data: Vec<f64> = (0..t * d).map(|_| c.f32().unwrap() as f64).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite feature value".into()));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(bad(format!("invalid fps {fps}")));
    }
    Ok(FeatureFile { fps, features: SeqMatrix::from_vec(t, d, data)? })
}

/// Writes features at `f32` precision.
pub fn save_features(path: &Path, fps: f64, features: &SeqMatrix) -> Result<()> {
    let bytes = encode_features(fps, features)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: &Path) -> Result<FeatureFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}
