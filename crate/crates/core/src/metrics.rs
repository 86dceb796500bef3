//! Frame-level evaluation: per-class precision, recall, F1 and Jaccard,
//! their weighted averages, and the withdrawal-time error.
//!
//! Scores are computed from [`ConfusionCounts`], which add across videos, so
//! a fold's result is obtained by summing the counts of its test videos and
//! scoring once.

use serde::{Deserialize, Serialize};

use crate::data::LabelClass;
use crate::error::{Error, Result};

/// Per-class frame-set sizes: `|GT_c|`, `|P_c|` and `|GT_c ∩ P_c|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub gt: Vec<u64>,
    pub pred: Vec<u64>,
    pub intersection: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Self {
        Self { gt: vec![0; classes], pred: vec![0; classes], intersection: vec![0; classes] }
    }

    pub fn classes(&self) -> usize {
        self.gt.len()
    }

    /// Number of evaluated frames.
    pub fn frames(&self) -> u64 {
        self.gt.iter().sum()
    }

    pub fn union(&self, c: usize) -> u64 {
        self.gt[c] + self.pred[c] - self.intersection[c]
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        assert_eq!(self.classes(), other.classes(), "class count mismatch");
        for c in 0..self.classes() {
            self.gt[c] += other.gt[c];
            self.pred[c] += other.pred[c];
            self.intersection[c] += other.intersection[c];
        }
    }
}

/// Counts over the frames where `mask` is true.
pub fn confusion(pred: &[usize], gt: &[usize], mask: &[bool], classes: usize) -> Result<ConfusionCounts> {
    if pred.len() != gt.len() || mask.len() != gt.len() {
        return Err(Error::shape(format!(
            "{} predictions, {} labels, {} mask entries",
            pred.len(),
            gt.len(),
            mask.len()
        )));
    }
    let mut counts = ConfusionCounts::new(classes);
    for (t, ((&p, &g), &m)) in pred.iter().zip(gt).zip(mask).enumerate() {
        if !m {
            continue;
        }
        if p >= classes || g >= classes {
            return Err(Error::data(format!("frame {t}: label outside [0, {classes})")));
        }
        counts.gt[g] += 1;
        counts.pred[p] += 1;
        if p == g {
            counts.intersection[g] += 1;
        }
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision, recall and F1. Empty denominators give zero.
pub fn f1_scores(counts: &ConfusionCounts) -> Vec<PrecisionRecall> {
    (0..counts.classes())
        .map(|c| {
            let i = counts.intersection[c] as f64;
            let precision = if counts.pred[c] == 0 { 0.0 } else { i / counts.pred[c] as f64 };
            let recall = if counts.gt[c] == 0 { 0.0 } else { i / counts.gt[c] as f64 };
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            PrecisionRecall { precision, recall, f1 }
        })
        .collect()
}

/// Per-class Jaccard index; `None` when the class appears in neither set.
pub fn jaccard_scores(counts: &ConfusionCounts) -> Vec<Option<f64>> {
    (0..counts.classes())
        .map(|c| match counts.union(c) {
            0 => None,
            u => Some(counts.intersection[c] as f64 / u as f64),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `w_c = |GT_c| / Σ|GT|`.
    #[default]
    Support,
    /// `w_c ∝ 1 / |GT_c|`, normalized to sum to one.
    InverseFrequency,
}

/// Normalized class weights; classes without ground-truth frames get zero.
pub fn class_weights(support: &[u64], mode: WeightMode) -> Result<Vec<f64>> {
    let raw: Vec<f64> = support
        .iter()
        .map(|&n| match (n, mode) {
            (0, _) => 0.0,
            (n, WeightMode::Support) => n as f64,
            (n, WeightMode::InverseFrequency) => 1.0 / n as f64,
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return Err(Error::data("no class has ground-truth frames"));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted mean of per-class scores over classes present in the ground truth.
pub fn weighted_average(scores: &[f64], support: &[u64], mode: WeightMode) -> Result<f64> {
    if scores.len() != support.len() {
        return Err(Error::shape(format!("{} scores for {} classes", scores.len(), support.len())));
    }
    let w = class_weights(support, mode)?;
    Ok(scores.iter().zip(&w).filter(|(_, &w)| w > 0.0).map(|(s, w)| s * w).sum())
}

fn is_withdrawal(label: usize) -> bool {
    (LabelClass::Cecum as usize..=LabelClass::Rectum as usize).contains(&label)
}

/// Actual and predicted withdrawal frame counts of one video.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalCounts {
    pub actual: u64,
    pub predicted: u64,
}

impl WithdrawalCounts {
    /// Counts colon-segment frames (neither outside nor insertion) among
    /// the frames where `mask` is true.
    pub fn from_labels(gt: &[usize], pred: &[usize], mask: &[bool]) -> Result<Self> {
        if pred.len() != gt.len() || mask.len() != gt.len() {
            return Err(Error::shape("withdrawal counts need equal lengths"));
        }
        let mut out = Self { actual: 0, predicted: 0 };
        for ((&g, &p), &m) in gt.iter().zip(pred).zip(mask) {
            if m {
                out.actual += is_withdrawal(g) as u64;
                out.predicted += is_withdrawal(p) as u64;
            }
        }
        Ok(out)
    }

    /// `|A - P| / A * 100`.
    pub fn percent_error(&self) -> Result<f64> {
        if self.actual == 0 {
            return Err(Error::data("video has no ground-truth withdrawal frames"));
        }
        Ok((self.actual as f64 - self.predicted as f64).abs() / self.actual as f64 * 100.0)
    }
}

/// Mean absolute percentage error of withdrawal frame counts, in percent.
pub fn wmape(videos: &[WithdrawalCounts]) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::data("WMAPE over zero videos"));
    }
    let mut sum = 0.0;
    for v in videos {
        sum += v.percent_error()?;
    }
    Ok(sum / videos.len() as f64)
}

/// Ground truth and prediction of one evaluated video.
#[derive(Clone, Copy, Debug)]
pub struct VideoEval<'a> {
    pub video_id: &'a str,
    pub gt: &'a [usize],
    pub pred: &'a [usize],
    pub mask: &'a [bool],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    /// `None` for classes absent from the ground truth.
    pub f1: Option<f64>,
    pub jaccard: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub frames: u64,
    pub actual_withdrawal: u64,
    pub predicted_withdrawal: u64,
    pub withdrawal_error_percent: Option<f64>,
    pub wf1: Option<f64>,
    pub wjacc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassReport>,
    /// Support-weighted F1.
    pub wf1: f64,
    pub wjacc: f64,
    /// Inverse-frequency-weighted F1.
    pub wf1_inverse: f64,
    pub wjacc_inverse: f64,
    /// Percent.
    pub wmape: f64,
    pub frames: u64,
    pub counts: ConfusionCounts,
    pub videos: Vec<VideoReport>,
}

fn class_label(c: usize) -> String {
    LabelClass::from_index(c).map(|l| l.name().to_string()).unwrap_or_else(|| format!("class{c}"))
}

/// Scores computed from `counts`: `(wF1, wJacc)` under `mode`.
pub fn weighted_scores(counts: &ConfusionCounts, mode: WeightMode) -> Result<(f64, f64)> {
    let f1: Vec<f64> = f1_scores(counts).iter().map(|s| s.f1).collect();
    let j: Vec<f64> = jaccard_scores(counts).iter().map(|j| j.unwrap_or(0.0)).collect();
    Ok((weighted_average(&f1, &counts.gt, mode)?, weighted_average(&j, &counts.gt, mode)?))
}

/// Full report over a set of videos with micro aggregation.
pub fn evaluate(videos: &[VideoEval<'_>], classes: usize) -> Result<MetricsReport> {
    if videos.is_empty() {
        return Err(Error::data("evaluation over zero videos"));
    }
    let mut total = ConfusionCounts::new(classes);
    let mut withdrawal = Vec::with_capacity(videos.len());
    let mut rows = Vec::with_capacity(videos.len());
    for v in videos {
        let counts = confusion(v.pred, v.gt, v.mask, classes)?;
        let w = WithdrawalCounts::from_labels(v.gt, v.pred, v.mask)?;
        let per_video = weighted_scores(&counts, WeightMode::Support).ok();
        rows.push(VideoReport {
            video_id: v.video_id.to_string(),
            frames: counts.frames(),
            actual_withdrawal: w.actual,
            predicted_withdrawal: w.predicted,
            withdrawal_error_percent: w.percent_error().ok(),
            wf1: per_video.map(|s| s.0),
            wjacc: per_video.map(|s| s.1),
        });
        total.add(&counts);
        withdrawal.push(w);
    }
    let pr = f1_scores(&total);
    let jac = jaccard_scores(&total);
    let class_rows = (0..classes)
        .map(|c| ClassReport {
            class: class_label(c),
            support: total.gt[c],
            predicted: total.pred[c],
            precision: pr[c].precision,
            recall: pr[c].recall,
            f1: (total.gt[c] > 0).then_some(pr[c].f1),
            jaccard: if total.gt[c] > 0 { jac[c] } else { None },
        })
        .collect();
    let (wf1, wjacc) = weighted_scores(&total, WeightMode::Support)?;
    let (wf1_inverse, wjacc_inverse) = weighted_scores(&total, WeightMode::InverseFrequency)?;
    Ok(MetricsReport {
        classes: class_rows,
        wf1,
        wjacc,
        wf1_inverse,
        wjacc_inverse,
        wmape: wmape(&withdrawal)?,
        frames: total.frames(),
        counts: total,
        videos: rows,
    })
}
