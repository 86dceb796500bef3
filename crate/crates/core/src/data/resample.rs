//! Frame-rate standardization and temporal subsampling augmentation.
//!
//! Both operations choose a list of source frame indices and apply it to
//! features, labels and mask together, so alignment is preserved.

use super::FeatureSequence;
use crate::error::{Error, Result};
use crate::seqcore::RngState;

/// Model frame rate.
pub const TARGET_FPS: f64 = 5.0;

/// Indices `round(i * fps / target)` below `frames`.
pub fn resample_indices(frames: usize, fps: f64, target: f64) -> Result<Vec<usize>> {
    if !(target > 0.0) || !(fps > 0.0) {
        return Err(Error::config("frame rates must be positive"));
    }
    if target > fps {
        return Err(Error::config(format!("cannot resample {fps} fps up to {target} fps")));
    }
    let step = fps / target;
    Ok(strided(frames, 0.0, step))
}

fn strided(frames: usize, offset: f64, step: f64) -> Vec<usize> {
    (0..).map(|i| (offset + i as f64 * step).round() as usize).take_while(|&k| k < frames).collect()
}

pub fn resample_to_fps(seq: &FeatureSequence, target: f64) -> Result<FeatureSequence> {
    if (seq.fps - target).abs() < 1e-9 {
        return Ok(seq.clone());
    }
    let idx = resample_indices(seq.len(), seq.fps, target)?;
    Ok(seq.select(&idx, target))
}

/// Index map of one augmentation draw for a `frames`-long video subsampled
/// by `factor`.
///
/// With probability one half, a phase `o` is drawn uniformly from
/// `[0, factor)` and frames `round(o + i * factor)` are kept; otherwise
/// every `ceil(factor)`-th frame from frame 0 is kept. A factor of at most
/// one keeps every frame.
pub fn augment_indices(frames: usize, factor: f64, rng: &mut RngState) -> Vec<usize> {
    if factor <= 1.0 + 1e-9 {
        return (0..frames).collect();
    }
    if rng.uniform() < 0.5 {
        let offset = rng.uniform() * factor;
        strided(frames, offset, factor)
    } else {
        (0..frames).step_by(factor.ceil() as usize).collect()
    }
}

/// Random temporal subsampling of a video at its original rate down to
/// [`TARGET_FPS`].
pub fn temporal_augment(seq: &FeatureSequence, rng: &mut RngState) -> FeatureSequence {
    let factor = seq.fps / TARGET_FPS;
    if factor <= 1.0 + 1e-9 {
        return seq.clone();
    }
    let idx = augment_indices(seq.len(), factor, rng);
    seq.select(&idx, TARGET_FPS)
}
