use super::FeatureSequence;
use crate::error::{Error, Result};
use crate::seqcore::SeqMatrix;

/// Sequences zero-padded to a common length.
///
/// Padded frames carry label 0 and a `false` mask. Consumers read each
/// sequence through [`Batch::real`], which never exposes padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub video_ids: Vec<String>,
    /// One `max_len x D` matrix per sequence.
    pub features: Vec<SeqMatrix>,
    pub labels: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
    pub lengths: Vec<usize>,
    pub max_len: usize,
}

/// Real (unpadded) view of one batch entry.
#[derive(Clone, Debug)]
pub struct RealSequence<'a> {
    pub features: SeqMatrix,
    pub labels: &'a [usize],
    pub mask: &'a [bool],
}

pub fn make_batch(seqs: &[FeatureSequence]) -> Result<Batch> {
    let first = seqs.first().ok_or_else(|| Error::data("cannot batch zero sequences"))?;
    let d = first.dim();
    if let Some(s) = seqs.iter().find(|s| s.dim() != d) {
        return Err(Error::shape(format!("video {} has dimension {}, batch has {d}", s.video_id, s.dim())));
    }
    let max_len = seqs.iter().map(FeatureSequence::len).max().unwrap_or(0);
    let mut batch = Batch {
        video_ids: Vec::with_capacity(seqs.len()),
        features: Vec::with_capacity(seqs.len()),
        labels: Vec::with_capacity(seqs.len()),
        mask: Vec::with_capacity(seqs.len()),
        lengths: Vec::with_capacity(seqs.len()),
        max_len,
    };
    for s in seqs {
        let t = s.len();
        let mut feats = SeqMatrix::zeros(max_len, d);
        feats.as_mut_slice()[..t * d].copy_from_slice(s.features.as_slice());
        let mut labels = s.targets();
        labels.resize(max_len, 0);
        let mut mask = s.mask.clone();
        mask.resize(max_len, false);
        batch.video_ids.push(s.video_id.clone());
        batch.features.push(feats);
        batch.labels.push(labels);
        batch.mask.push(mask);
        batch.lengths.push(t);
    }
    Ok(batch)
}

impl Batch {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn real(&self, b: usize) -> RealSequence<'_> {
        let t = self.lengths[b];
        RealSequence {
            features: self.features[b].slice_rows(0, t),
            labels: &self.labels[b][..t],
            mask: &self.mask[b][..t],
        }
    }
}
