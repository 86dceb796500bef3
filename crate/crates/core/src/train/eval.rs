use rayon::prelude::*;

use crate::data::{resample_indices, resample_to_fps, FeatureSequence, TARGET_FPS};
use crate::error::Result;
use crate::metrics::{confusion, evaluate, weighted_scores, ConfusionCounts, MetricsReport, VideoEval, WeightMode};
use crate::model::{multistage_forward, ModelConfig, ModelParams};
use crate::seqcore::{RngState, SeqMatrix};

/// Sequence brought to the model frame rate.
pub fn at_model_rate(seq: &FeatureSequence) -> Result<FeatureSequence> {
    resample_to_fps(seq, TARGET_FPS)
}

/// Per-frame predictions of a sequence already at the model frame rate.
pub fn predict_sequence(model: &ModelConfig, params: &ModelParams, seq: &FeatureSequence) -> Result<Vec<usize>> {
    Ok(multistage_forward(&seq.features, model, params, &RngState::new(0), false)?.predict())
}

/// Last-stage class probabilities for every frame of a video recorded at
/// `fps`.
///
/// The model runs at [`TARGET_FPS`]; each source frame takes the output of
/// the latest model-rate frame at or before it.
pub fn predict_probabilities(
    model: &ModelConfig,
    params: &ModelParams,
    features: &SeqMatrix,
    fps: f64,
) -> Result<SeqMatrix> {
    let t = features.rows();
    let classes = model.num_classes();
    if t == 0 {
        return Ok(SeqMatrix::zeros(0, classes));
    }
    let idx: Vec<usize> =
        if (fps - TARGET_FPS).abs() < 1e-9 { (0..t).collect() } else { resample_indices(t, fps, TARGET_FPS)? };
    let out = multistage_forward(&features.select_rows(&idx), model, params, &RngState::new(0), false)?;
    let probs = out.last();
    let mut full = SeqMatrix::zeros(t, classes);
    let mut j = 0;
    for s in 0..t {
        while j + 1 < idx.len() && idx[j + 1] <= s {
            j += 1;
        }
        full.row_mut(s).copy_from_slice(probs.row(j));
    }
    Ok(full)
}

fn predict_all(
    model: &ModelConfig,
    params: &ModelParams,
    seqs: &[FeatureSequence],
) -> Result<Vec<(FeatureSequence, Vec<usize>)>> {
    seqs.par_iter()
        .map(|s| {
            let s = at_model_rate(s)?;
            let pred = predict_sequence(model, params, &s)?;
            Ok((s, pred))
        })
        .collect()
}

/// Support-weighted `(wF1, wJacc)` over `seqs` with micro aggregation.
pub fn validation_scores(model: &ModelConfig, params: &ModelParams, seqs: &[FeatureSequence]) -> Result<(f64, f64)> {
    let mut total = ConfusionCounts::new(model.num_classes());
    for (s, pred) in predict_all(model, params, seqs)? {
        total.add(&confusion(&pred, &s.targets(), &s.mask, model.num_classes())?);
    }
    weighted_scores(&total, WeightMode::Support)
}

/// Full metrics report of a model over `seqs`.
pub fn evaluate_model(model: &ModelConfig, params: &ModelParams, seqs: &[FeatureSequence]) -> Result<MetricsReport> {
    let predicted = predict_all(model, params, seqs)?;
    let targets: Vec<Vec<usize>> = predicted.iter().map(|(s, _)| s.targets()).collect();
    let videos: Vec<VideoEval<'_>> = predicted
        .iter()
        .zip(&targets)
        .map(|((s, pred), gt)| VideoEval { video_id: &s.video_id, gt, pred, mask: &s.mask })
        .collect();
    evaluate(&videos, model.num_classes())
}
