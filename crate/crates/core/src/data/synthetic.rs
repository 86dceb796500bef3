//! Synthetic colonoscopy-like procedures for desk-scale experiments.
//!
//! Each video walks the fixed anatomical order
//! outside, insertion, cecum, (ileum, cecum), ascending, transverse,
//! descending, sigmoid, rectum, outside, with segment durations drawn from
//! truncated log-normal laws whose means match per-class statistics of real
//! procedures. Frame features are a per-class mean vector plus white noise,
//! smoothed by a centered moving average.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{FeatureSequence, LabelClass};
use crate::error::{Error, Result};
use crate::seqcore::{RngState, SeqMatrix};

/// Segment duration statistics in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

const fn stats(mean: f64, min: f64, max: f64) -> DurationStats {
    DurationStats { mean, min, max }
}

/// Mean, minimum and maximum per-video duration of each target class, in
/// seconds, indexed by class. The outside entry is the per-video total of
/// both outside segments and the ileum entry averages over all videos,
/// including those where the ileum is never reached.
pub const DEFAULT_DURATIONS: [DurationStats; 9] = [
    stats(29.1, 0.0, 105.0),
    stats(594.4, 113.0, 2608.0),
    stats(133.2, 17.0, 608.0),
    stats(10.0, 0.0, 132.0),
    stats(140.6, 13.0, 656.0),
    stats(355.0, 49.0, 1964.0),
    stats(148.2, 13.0, 1132.0),
    stats(176.8, 25.0, 726.0),
    stats(101.4, 5.0, 597.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub durations: [DurationStats; 9],
    /// Fraction of videos in which the ileum is reached.
    pub ileum_presence_prob: f64,
    pub feature_dim: usize,
    /// Norm of each class mean vector.
    pub separation: f64,
    /// Standard deviation of the per-frame white noise.
    pub noise: f64,
    /// Odd moving-average window in frames; 1 disables smoothing.
    pub smoothing_window: usize,
    pub fps: f64,
    /// Videos are spread evenly over this many cohorts.
    pub cohorts: usize,
    /// Seed used by tools that generate a dataset from a spec file alone.
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            durations: DEFAULT_DURATIONS,
            ileum_presence_prob: 26.0 / 60.0,
            feature_dim: 16,
            separation: 1.0,
            noise: 2.0,
            smoothing_window: 5,
            fps: 5.0,
            cohorts: 4,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Same procedure structure with every duration statistic multiplied by
    /// `factor`; handy for fast tests.
    pub fn with_duration_scale(mut self, factor: f64) -> Self {
        for d in &mut self.durations {
            d.mean *= factor;
            d.min *= factor;
            d.max *= factor;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.ileum_presence_prob;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("ileum presence probability {p} outside [0, 1]")));
        }
        for (c, d) in self.durations.iter().enumerate() {
            let name = LabelClass::TARGETS[c].name();
            if !(d.min >= 0.0 && d.min <= d.mean && d.mean <= d.max && d.max.is_finite()) {
                return Err(Error::config(format!(
                    "{name}: need 0 <= min <= mean <= max, got {} [{}, {}]",
                    d.mean, d.min, d.max
                )));
            }
        }
        self.duration_law(LabelClass::Ileum)?;
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be positive"));
        }
        if !(self.separation >= 0.0 && self.noise >= 0.0) {
            return Err(Error::config("separation and noise must be nonnegative"));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::config("smoothing window must be odd"));
        }
        if !(self.fps > 0.0) {
            return Err(Error::config("fps must be positive"));
        }
        if self.cohorts == 0 {
            return Err(Error::config("need at least one cohort"));
        }
        Ok(())
    }

    /// Duration law of one present segment of class `c`.
    pub fn duration_law(&self, c: LabelClass) -> Result<TruncatedLogNormal> {
        let d = self.durations[c.index()];
        if c == LabelClass::Ileum {
            if self.ileum_presence_prob == 0.0 {
                return TruncatedLogNormal::new(d.max.min(1.0), 0.0, d.max.max(1.0));
            }
            let conditional = d.mean / self.ileum_presence_prob;
            if conditional > d.max {
                return Err(Error::config(format!(
                    "ileum mean {} at presence {} exceeds its maximum {}",
                    d.mean, self.ileum_presence_prob, d.max
                )));
            }
            return TruncatedLogNormal::new(conditional, d.min, d.max);
        }
        TruncatedLogNormal::new(d.mean, d.min, d.max)
    }
}

/// Log-normal law truncated to `[min, max]` with a prescribed mean.
///
/// The log-scale spread is tied to the range, `sigma = ln(max / mean) / 2`
/// (at least 0.25), and the location is solved by bisection so the truncated
/// mean equals the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedLogNormal {
    pub mu: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn phi(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        std_normal().cdf(x)
    }
}

fn truncated_mean(mu: f64, sigma: f64, min: f64, max: f64) -> f64 {
    let (la, lb) = (min.ln(), max.ln());
    let mass = phi((lb - mu) / sigma) - phi((la - mu) / sigma);
    let partial = phi((lb - mu - sigma * sigma) / sigma) - phi((la - mu - sigma * sigma) / sigma);
    (mu + 0.5 * sigma * sigma).exp() * partial / mass
}

impl TruncatedLogNormal {
    pub fn new(mean: f64, min: f64, max: f64) -> Result<Self> {
        if !(min >= 0.0 && min <= mean && mean <= max && max > 0.0) {
            return Err(Error::config(format!("invalid duration law {mean} [{min}, {max}]")));
        }
        let sigma = ((max / mean).ln() / 2.0).max(0.25);
        if mean <= min || mean >= max {
            // degenerate: all mass at the mean
            return Ok(Self { mu: mean.ln(), sigma: 0.0, min, max, cdf_lo: 0.0, cdf_hi: 1.0 });
        }
        let floor = if min > 0.0 { min.ln() } else { (max * 1e-9).ln() };
        let (mut lo, mut hi) = (floor - 6.0 * sigma, max.ln() + 6.0 * sigma);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let m = truncated_mean(mid, sigma, min, max);
            if !m.is_finite() {
                break;
            }
            if m < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        Ok(Self { mu, sigma, min, max, cdf_lo: phi((min.ln() - mu) / sigma), cdf_hi: phi((max.ln() - mu) / sigma) })
    }

    pub fn mean(&self) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.exp();
        }
        truncated_mean(self.mu, self.sigma, self.min, self.max)
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngState) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.exp();
        }
        let p = self.cdf_lo + rng.uniform() * (self.cdf_hi - self.cdf_lo);
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        (self.mu + self.sigma * std_normal().inverse_cdf(p)).exp().clamp(self.min, self.max)
    }
}

/// Cohort and within-cohort number of synthetic video `index`.
pub fn synthetic_cohort(index: usize, n_videos: usize, cohorts: usize) -> (usize, usize) {
    let cohort = index * cohorts / n_videos.max(1);
    let first = (cohort * n_videos).div_ceil(cohorts);
    (cohort, index - first)
}

/// Identifier `CCC-NNN` with one-based cohort and video numbers.
pub fn synthetic_video_id(index: usize, n_videos: usize, cohorts: usize) -> String {
    let (c, k) = synthetic_cohort(index, n_videos, cohorts);
    format!("{:03}-{:03}", c + 1, k + 1)
}

/// Cohort part of a `CCC-NNN` identifier.
pub fn cohort_of(video_id: &str) -> &str {
    video_id.split_once('-').map_or(video_id, |(c, _)| c)
}

/// Segment plan of one video: `(class, frames)` in temporal order.
pub fn draw_segments(spec: &SyntheticSpec, rng: &mut RngState) -> Result<Vec<(LabelClass, usize)>> {
    use LabelClass::*;
    let frames = |sec: f64| ((sec * spec.fps).round() as usize).max(1);
    let outside_total = frames(spec.duration_law(Outside)?.sample(rng)).max(2);
    let outside_start = ((rng.uniform() * outside_total as f64).round() as usize).clamp(1, outside_total - 1);
    let mut plan = vec![(Outside, outside_start), (Insertion, frames(spec.duration_law(Insertion)?.sample(rng)))];
    let cecum = frames(spec.duration_law(Cecum)?.sample(rng));
    if rng.uniform() < spec.ileum_presence_prob {
        let ileum = frames(spec.duration_law(Ileum)?.sample(rng));
        let cecum = cecum.max(2);
        let first = ((0.2 + 0.6 * rng.uniform()) * cecum as f64).round() as usize;
        let first = first.clamp(1, cecum - 1);
        plan.extend([(Cecum, first), (Ileum, ileum), (Cecum, cecum - first)]);
    } else {
        plan.push((Cecum, cecum));
    }
    for c in [Ascending, Transverse, Descending, Sigmoid, Rectum] {
        plan.push((c, frames(spec.duration_law(c)?.sample(rng))));
    }
    plan.push((Outside, outside_total - outside_start));
    Ok(plan)
}

fn class_means(spec: &SyntheticSpec, rng: &RngState) -> Vec<Vec<f64>> {
    let mut rng = rng.derive(&[0xc1a55]);
    (0..LabelClass::TARGETS.len())
        .map(|_| {
            let v: Vec<f64> = (0..spec.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x * spec.separation / norm).collect()
        })
        .collect()
}

fn moving_average(x: &SeqMatrix, window: usize) -> SeqMatrix {
    if window <= 1 {
        return x.clone();
    }
    let (t, d) = x.shape();
    let half = window / 2;
    let mut out = SeqMatrix::zeros(t, d);
    for i in 0..t {
        let (lo, hi) = (i.saturating_sub(half), (i + half).min(t - 1));
        let row = out.row_mut(i);
        for j in lo..=hi {
            for (o, v) in row.iter_mut().zip(x.row(j)) {
                *o += v;
            }
        }
        let n = (hi - lo + 1) as f64;
        row.iter_mut().for_each(|o| *o /= n);
    }
    out
}

fn generate_video(
    spec: &SyntheticSpec,
    means: &[Vec<f64>],
    index: usize,
    n_videos: usize,
    rng: &RngState,
) -> Result<FeatureSequence> {
    let mut rng = rng.derive(&[0x71de0, index as u64]);
    let plan = draw_segments(spec, &mut rng)?;
    let labels: Vec<LabelClass> = plan.iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n)).collect();
    let d = spec.feature_dim;
    let mut raw = SeqMatrix::zeros(labels.len(), d);
    for (t, l) in labels.iter().enumerate() {
        for (x, m) in raw.row_mut(t).iter_mut().zip(&means[l.index()]) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *x = m + spec.noise * e;
        }
    }
    // stored at the precision of the feature file format
    let features = moving_average(&raw, spec.smoothing_window).map(|v| v as f32 as f64);
    FeatureSequence::new(synthetic_video_id(index, n_videos, spec.cohorts), spec.fps, features, labels)
}

/// Generates `n_videos` procedures. Video `i` depends only on the spec, the
/// generator state and `i`.
pub fn generate_synthetic(spec: &SyntheticSpec, n_videos: usize, rng: &RngState) -> Result<Vec<FeatureSequence>> {
    use rayon::prelude::*;
    spec.validate()?;
    let means = class_means(spec, rng);
    (0..n_videos).into_par_iter().map(|i| generate_video(spec, &means, i, n_videos, rng)).collect()
}
