//! Cross-validation splits.
//!
//! The 5-fold scheme stratifies by cohort: each cohort's videos are
//! shuffled and cut into five chunks; fold `k` tests chunk `k` of every
//! cohort and validates on the first video of chunk `k + 1`. With four
//! cohorts of fifteen videos this gives 44 training, 4 validation and 12
//! test videos per fold. The 4-fold scheme holds out whole cohorts: fold `k`
//! tests cohort `k`, validates on cohort `k + 1` and trains on the others.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldScheme {
    #[serde(rename = "5fold")]
    FiveFold,
    #[serde(rename = "4fold")]
    FourFold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub scheme: FoldScheme,
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

fn by_cohort(videos: &[(String, String)]) -> BTreeMap<&str, Vec<&str>> {
    let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, cohort) in videos {
        m.entry(cohort.as_str()).or_default().push(id.as_str());
    }
    for ids in m.values_mut() {
        ids.sort_unstable();
    }
    m
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

/// Cohort-stratified 5-fold splits of `(video_id, cohort)` pairs.
pub fn five_fold(videos: &[(String, String)], seed: u64) -> Result<Vec<FoldSpec>> {
    const K: usize = 5;
    let cohorts = by_cohort(videos);
    // chunks[c][k] = videos of cohort c in chunk k
    let mut chunks: Vec<Vec<Vec<String>>> = Vec::new();
    for (ci, ids) in cohorts.values().enumerate() {
        let mut ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        RngState::new(seed).derive(&[0xf01d, ci as u64]).shuffle(&mut ids);
        let n = ids.len();
        chunks.push((0..K).map(|k| ids[k * n / K..(k + 1) * n / K].to_vec()).collect());
    }
    let mut folds = Vec::with_capacity(K);
    for k in 0..K {
        let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for cohort in &chunks {
            test.extend(cohort[k].iter().cloned());
            let next = &cohort[(k + 1) % K];
            valid.extend(next.first().cloned());
            for (j, chunk) in cohort.iter().enumerate() {
                let skip = if j == (k + 1) % K { 1 } else { 0 };
                if j != k {
                    train.extend(chunk.iter().skip(skip).cloned());
                }
            }
        }
        folds.push(FoldSpec {
            fold_id: k,
            scheme: FoldScheme::FiveFold,
            train: sorted(train),
            valid: sorted(valid),
            test: sorted(test),
        });
    }
    validate_folds(&folds, Some(videos))?;
    Ok(folds)
}

/// Cohort-held-out 4-fold splits; requires exactly four cohorts.
pub fn four_fold(videos: &[(String, String)]) -> Result<Vec<FoldSpec>> {
    let cohorts: Vec<Vec<String>> =
        by_cohort(videos).into_values().map(|ids| ids.into_iter().map(str::to_string).collect()).collect();
    if cohorts.len() != 4 {
        return Err(Error::data(format!("the 4-fold scheme needs exactly 4 cohorts, found {}", cohorts.len())));
    }
    let folds: Vec<FoldSpec> = (0..4)
        .map(|k| FoldSpec {
            fold_id: k,
            scheme: FoldScheme::FourFold,
            train: sorted(
                (0..4).filter(|&j| j != k && j != (k + 1) % 4).flat_map(|j| cohorts[j].iter().cloned()).collect(),
            ),
            valid: cohorts[(k + 1) % 4].clone(),
            test: cohorts[k].clone(),
        })
        .collect();
    validate_folds(&folds, Some(videos))?;
    Ok(folds)
}

/// Checks each fold's splits are non-empty, duplicate-free and pairwise
/// disjoint, and that no video is tested twice. With `universe`, every
/// listed video must be known and tested exactly once, and the 4-fold
/// scheme must split along cohorts.
pub fn validate_folds(folds: &[FoldSpec], universe: Option<&[(String, String)]>) -> Result<()> {
    if folds.is_empty() {
        return Err(Error::data("no folds"));
    }
    let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
    for f in folds {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (split, ids) in [("train", &f.train), ("valid", &f.valid), ("test", &f.test)] {
            if ids.is_empty() {
                return Err(Error::data(format!("fold {}: empty {split} split", f.fold_id)));
            }
            for id in ids {
                if let Some(prev) = seen.insert(id, split) {
                    return Err(Error::data(format!("fold {}: video {id} is in both {prev} and {split}", f.fold_id)));
                }
            }
        }
        for id in &f.test {
            if let Some(other) = tested.insert(id, f.fold_id) {
                return Err(Error::data(format!("video {id} is tested in folds {other} and {}", f.fold_id)));
            }
        }
    }
    if let Some(universe) = universe {
        let known: BTreeMap<&str, &str> = universe.iter().map(|(i, c)| (i.as_str(), c.as_str())).collect();
        for f in folds {
            for id in f.train.iter().chain(&f.valid).chain(&f.test) {
                if !known.contains_key(id.as_str()) {
                    return Err(Error::data(format!("fold {}: unknown video {id}", f.fold_id)));
                }
            }
            if f.scheme == FoldScheme::FourFold {
                let cohorts = |ids: &[String]| -> BTreeSet<&str> { ids.iter().map(|i| known[i.as_str()]).collect() };
                let (tr, va, te) = (cohorts(&f.train), cohorts(&f.valid), cohorts(&f.test));
                if va.len() != 1
                    || te.len() != 1
                    || tr.len() != 2
                    || !tr.is_disjoint(&va)
                    || !tr.is_disjoint(&te)
                    || va == te
                {
                    return Err(Error::data(format!(
                        "fold {}: 4-fold splits must be two training cohorts, one validation and one test cohort",
                        f.fold_id
                    )));
                }
            }
        }
        if let Some((id, _)) = universe.iter().find(|(id, _)| !tested.contains_key(id.as_str())) {
            return Err(Error::data(format!("video {id} is never tested")));
        }
    }
    Ok(())
}

pub fn save_folds(path: &Path, folds: &[FoldSpec]) -> Result<()> {
    let text = serde_json::to_string_pretty(folds).expect("folds serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_folds(path: &Path) -> Result<Vec<FoldSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, format!("fold document: {e}")))
}
