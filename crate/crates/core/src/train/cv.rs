use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::evaluate_model;
use super::folds::{validate_folds, FoldSpec};
use super::trainer::{train, TrainConfig, TrainOutcome};
use crate::data::FeatureSequence;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_id: usize,
    pub best_iteration: u64,
    pub valid_wf1: Option<f64>,
    pub test: MetricsReport,
}

/// Fold means. Per-class entries average the folds where the class occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub class_f1: Vec<Option<f64>>,
    pub class_jaccard: Vec<Option<f64>>,
    pub wf1: f64,
    pub wjacc: f64,
    pub wf1_inverse: f64,
    pub wjacc_inverse: f64,
    pub wmape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: CvSummary,
}

pub struct CvRun {
    pub report: CvReport,
    pub outcomes: Vec<TrainOutcome>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn mean_opt<'a>(v: impl Iterator<Item = &'a Option<f64>>) -> Option<f64> {
    let xs: Vec<f64> = v.flatten().copied().collect();
    (!xs.is_empty()).then(|| mean(xs.into_iter()))
}

pub fn summarize(folds: &[FoldReport]) -> CvSummary {
    let classes = folds.first().map_or(0, |f| f.test.classes.len());
    CvSummary {
        class_f1: (0..classes).map(|c| mean_opt(folds.iter().map(|f| &f.test.classes[c].f1))).collect(),
        class_jaccard: (0..classes).map(|c| mean_opt(folds.iter().map(|f| &f.test.classes[c].jaccard))).collect(),
        wf1: mean(folds.iter().map(|f| f.test.wf1)),
        wjacc: mean(folds.iter().map(|f| f.test.wjacc)),
        wf1_inverse: mean(folds.iter().map(|f| f.test.wf1_inverse)),
        wjacc_inverse: mean(folds.iter().map(|f| f.test.wjacc_inverse)),
        wmape: mean(folds.iter().map(|f| f.test.wmape)),
    }
}

fn pick(dataset: &[FeatureSequence], ids: &[String]) -> Result<Vec<FeatureSequence>> {
    ids.iter()
        .map(|id| {
            dataset
                .iter()
                .find(|s| s.video_id == *id)
                .cloned()
                .ok_or_else(|| Error::data(format!("video {id} is not in the dataset")))
        })
        .collect()
}

/// Trains and tests every fold, folds in parallel.
pub fn run_cv(folds: &[FoldSpec], dataset: &[FeatureSequence], cfg: &TrainConfig) -> Result<CvRun> {
    validate_folds(folds, None)?;
    cfg.validate()?;
    let runs: Vec<(FoldReport, TrainOutcome)> = folds
        .par_iter()
        .map(|f| {
            let (tr, va, te) = (pick(dataset, &f.train)?, pick(dataset, &f.valid)?, pick(dataset, &f.test)?);
            let outcome = train(cfg, &tr, &va)?;
            let test = evaluate_model(&cfg.model, &outcome.best.params, &te)?;
            Ok((
                FoldReport {
                    fold_id: f.fold_id,
                    best_iteration: outcome.best.iteration,
                    valid_wf1: outcome.best.valid_wf1,
                    test,
                },
                outcome,
            ))
        })
        .collect::<Result<_>>()?;
    let (folds, outcomes): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(CvRun { report: CvReport { mean: summarize(&folds), folds }, outcomes })
}
