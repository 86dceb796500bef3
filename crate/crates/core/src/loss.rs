//! Training objective.
//!
//! Every loss takes per-frame log-probabilities (rows of `log_softmax`) and
//! returns its value together with the gradient with respect to those
//! log-probabilities. Frames whose mask entry is `false` (padding, uncertain
//! annotations) contribute nothing, and normalizers count unmasked frames only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::SeqMatrix;

/// Per-class loss weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub Vec<f64>);

impl ClassWeights {
    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0; classes])
    }

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("class weights must be finite and nonnegative"));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::config("at least one class weight must be positive"));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Truncation threshold of the smoothing term.
    pub tau: f64,
    /// Weight of the smoothing term.
    pub lambda: f64,
    pub use_tmse: bool,
    /// Replace cross-entropy by focal loss with this exponent.
    pub focal_gamma: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { tau: 4.0, lambda: 0.15, use_tmse: true, focal_gamma: None }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::config(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda = {} must be nonnegative", self.lambda)));
        }
        if let Some(g) = self.focal_gamma {
            if !(g >= 0.0) {
                return Err(Error::config(format!("focal gamma {g} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// A loss value and its gradient with respect to the log-probabilities.
#[derive(Clone, Debug)]
pub struct LossTerm {
    pub value: f64,
    pub grad: SeqMatrix,
}

/// Median frequency balancing: `w_c = median(freq) / freq_c`.
///
/// Frequencies and the median are taken over classes with nonzero counts;
/// absent classes get weight zero.
pub fn median_frequency_weights(counts: &[u64]) -> Result<ClassWeights> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::data("no labeled frames to compute class weights from"));
    }
    let mut freqs: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / total as f64).collect();
    freqs.sort_by(f64::total_cmp);
    let n = freqs.len();
    let median = if n % 2 == 1 { freqs[n / 2] } else { 0.5 * (freqs[n / 2 - 1] + freqs[n / 2]) };
    Ok(ClassWeights(counts.iter().map(|&c| if c == 0 { 0.0 } else { median / (c as f64 / total as f64) }).collect()))
}

fn check_inputs(log_probs: &SeqMatrix, labels: &[usize], weights: &ClassWeights, mask: &[bool]) -> Result<usize> {
    let (t, c) = log_probs.shape();
    if labels.len() != t || mask.len() != t {
        return Err(Error::shape(format!("{t} frames but {} labels and {} mask entries", labels.len(), mask.len())));
    }
    if weights.len() != c {
        return Err(Error::shape(format!("{} class weights for {c} classes", weights.len())));
    }
    let mut valid = 0;
    for (i, (&l, &m)) in labels.iter().zip(mask).enumerate() {
        if m {
            if l >= c {
                return Err(Error::data(format!("label {l} at frame {i} outside [0, {c})")));
            }
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(Error::data("no unmasked frames"));
    }
    Ok(valid)
}

/// Mean over unmasked frames of `-w[y_t] * log p[t, y_t]`.
pub fn weighted_cross_entropy(
    log_probs: &SeqMatrix,
    labels: &[usize],
    weights: &ClassWeights,
    mask: &[bool],
) -> Result<LossTerm> {
    focal_weighted_ce(log_probs, labels, weights, 0.0, mask)
}

/// Mean over unmasked frames of `-w[y_t] * (1 - p_t)^gamma * log p_t`.
pub fn focal_weighted_ce(
    log_probs: &SeqMatrix,
    labels: &[usize],
    weights: &ClassWeights,
    gamma: f64,
    mask: &[bool],
) -> Result<LossTerm> {
    if !(gamma >= 0.0) {
        return Err(Error::config(format!("focal gamma {gamma} must be nonnegative")));
    }
    let valid = check_inputs(log_probs, labels, weights, mask)?;
    let norm = 1.0 / valid as f64;
    let mut grad = SeqMatrix::zeros(log_probs.rows(), log_probs.cols());
    let mut total = 0.0;
    for (t, (&y, &m)) in labels.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        let w = weights.0[y];
        let lp = log_probs.get(t, y);
        if gamma == 0.0 {
            total += -w * lp;
            grad.set(t, y, -w * norm);
        } else {
            let p = lp.exp();
            let q = (1.0 - p).max(0.0);
            let focus = q.powf(gamma);
            total += -w * focus * lp;
            // d/dlp [-(1-p)^g lp] = -(1-p)^g + g (1-p)^(g-1) p lp
            let tail = if q > 0.0 { gamma * q.powf(gamma - 1.0) * p * lp } else { 0.0 };
            grad.set(t, y, w * norm * (-focus + tail));
        }
    }
    Ok(LossTerm { value: total * norm, grad })
}

/// Truncated MSE between consecutive frames' log-probabilities.
///
/// `(1 / (N C)) * sum_{t,c} min(|lp[t,c] - lp[t-1,c]|, tau)^2` over pairs of
/// consecutive unmasked frames, `N` the number of unmasked frames. The
/// earlier frame of each pair is treated as a constant, so the returned
/// gradient only flows into the later frame.
pub fn truncated_mse(log_probs: &SeqMatrix, tau: f64, mask: &[bool]) -> LossTerm {
    truncated_mse_against(log_probs, log_probs, tau, mask)
}

/// [`truncated_mse`] with the earlier frame of each pair read from
/// `previous` instead of `log_probs`.
///
/// With `previous` frozen, this is an ordinary function of `log_probs` whose
/// exact gradient is the detached gradient of [`truncated_mse`] at
/// `log_probs == previous`.
pub fn truncated_mse_against(log_probs: &SeqMatrix, previous: &SeqMatrix, tau: f64, mask: &[bool]) -> LossTerm {
    let (t_len, c) = log_probs.shape();
    assert_eq!(mask.len(), t_len, "mask length");
    assert_eq!(previous.shape(), log_probs.shape(), "reference shape");
    let mut grad = SeqMatrix::zeros(t_len, c);
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return LossTerm { value: 0.0, grad };
    }
    let norm = 1.0 / (valid * c) as f64;
    let mut total = 0.0;
    for t in 1..t_len {
        if !(mask[t] && mask[t - 1]) {
            continue;
        }
        let (prev, cur) = (previous.row(t - 1), log_probs.row(t));
        let g = grad.row_mut(t);
        for k in 0..c {
            let delta = cur[k] - prev[k];
            if delta.abs() > tau {
                total += tau * tau;
            } else {
                total += delta * delta;
                g[k] = 2.0 * delta * norm;
            }
        }
    }
    LossTerm { value: total * norm, grad }
}

/// Loss of a multi-stage output with per-stage gradients.
#[derive(Clone, Debug)]
pub struct CombinedLoss {
    pub value: f64,
    pub grads: Vec<SeqMatrix>,
}

/// Mean over stages of `L_cls + lambda * L_tmse`.
pub fn combined_loss(
    stage_log_probs: &[SeqMatrix],
    labels: &[usize],
    weights: &ClassWeights,
    cfg: &LossConfig,
    mask: &[bool],
) -> Result<CombinedLoss> {
    combined_loss_against(stage_log_probs, stage_log_probs, labels, weights, cfg, mask)
}

/// [`combined_loss`] with the smoothing term's earlier frames read from
/// `previous` (see [`truncated_mse_against`]).
pub fn combined_loss_against(
    stage_log_probs: &[SeqMatrix],
    previous: &[SeqMatrix],
    labels: &[usize],
    weights: &ClassWeights,
    cfg: &LossConfig,
    mask: &[bool],
) -> Result<CombinedLoss> {
    if stage_log_probs.is_empty() {
        return Err(Error::shape("combined loss needs at least one stage"));
    }
    if previous.len() != stage_log_probs.len() {
        return Err(Error::shape("one smoothing reference per stage required"));
    }
    let scale = 1.0 / stage_log_probs.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(stage_log_probs.len());
    for (lp, prev) in stage_log_probs.iter().zip(previous) {
        let cls = match cfg.focal_gamma {
            Some(g) => focal_weighted_ce(lp, labels, weights, g, mask)?,
            None => weighted_cross_entropy(lp, labels, weights, mask)?,
        };
        let mut v = cls.value;
        let mut g = cls.grad;
        if cfg.use_tmse && cfg.lambda != 0.0 {
            let sm = truncated_mse_against(lp, prev, cfg.tau, mask);
            v += cfg.lambda * sm.value;
            crate::seqcore::axpy(g.as_mut_slice(), cfg.lambda, sm.grad.as_slice());
        }
        value += v * scale;
        g.scale(scale);
        grads.push(g);
    }
    Ok(CombinedLoss { value, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{grad_check, log_softmax_rows, RngState};

    fn lp_rows(rows: &[&[f64]]) -> SeqMatrix {
        SeqMatrix::from_rows(&rows.iter().map(|r| r.iter().map(|p| p.ln()).collect::<Vec<_>>()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn median_frequency_examples() {
        let w = median_frequency_weights(&[50, 30, 20]).unwrap();
        for (a, b) in w.0.iter().zip([0.6, 1.0, 1.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = median_frequency_weights(&[7, 7, 7, 7]).unwrap();
        assert!(w.0.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let w = median_frequency_weights(&[50, 0, 30, 20]).unwrap();
        assert_eq!(w.0[1], 0.0);
        assert!((w.0[0] - 0.6).abs() < 1e-12 && (w.0[3] - 1.5).abs() < 1e-12);
        assert!(median_frequency_weights(&[0, 0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let perfect = lp_rows(&[&[1.0, 1e-300], &[1e-300, 1.0]]);
        let l = weighted_cross_entropy(&perfect, &[0, 1], &ClassWeights::uniform(2), &[true, true]).unwrap();
        assert_eq!(l.value, 0.0);

        let uniform = log_softmax_rows(&SeqMatrix::zeros(4, 9));
        let l = weighted_cross_entropy(&uniform, &[0, 3, 8, 5], &ClassWeights::uniform(9), &[true; 4]).unwrap();
        assert!((l.value - 9f64.ln()).abs() < 1e-12);

        let lp = lp_rows(&[&[0.5, 0.5], &[0.25, 0.75]]);
        let w = ClassWeights::new(vec![2.0, 1.0]).unwrap();
        let l = weighted_cross_entropy(&lp, &[0, 1], &w, &[true, true]).unwrap();
        let expected = (2.0 * 2f64.ln() + (4.0f64 / 3.0).ln()) / 2.0;
        assert!((l.value - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_errors() {
        let lp = lp_rows(&[&[0.5, 0.5]]);
        let w = ClassWeights::uniform(2);
        assert!(weighted_cross_entropy(&lp, &[2], &w, &[true]).is_err());
        assert!(weighted_cross_entropy(&lp, &[0], &w, &[false]).is_err());
        // out-of-range label on a masked frame is ignored
        let lp2 = lp_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(weighted_cross_entropy(&lp2, &[0, 9], &w, &[true, false]).is_ok());
    }

    #[test]
    fn tmse_examples() {
        let constant = lp_rows(&[&[0.2, 0.8], &[0.2, 0.8], &[0.2, 0.8]]);
        assert_eq!(truncated_mse(&constant, 4.0, &[true; 3]).value, 0.0);

        let lp = lp_rows(&[&[0.5, 0.5], &[0.9, 0.1]]);
        let l = truncated_mse(&lp, 4.0, &[true, true]);
        let a = (0.9f64.ln() - 0.5f64.ln()).powi(2);
        let b = (0.1f64.ln() - 0.5f64.ln()).powi(2);
        assert!((l.value - 0.25 * (a + b)).abs() < 1e-12);

        let extreme = lp_rows(&[&[1.0, 1e-200], &[1e-200, 1.0]]);
        assert!((truncated_mse(&extreme, 4.0, &[true, true]).value - 16.0 * 2.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn focal_examples() {
        let lp = lp_rows(&[&[0.5, 0.5]]);
        let w = ClassWeights::uniform(2);
        let l = focal_weighted_ce(&lp, &[0], &w, 2.0, &[true]).unwrap();
        assert!((l.value - 0.25 * 2f64.ln()).abs() < 1e-12);
        let ce = weighted_cross_entropy(&lp, &[1], &w, &[true]).unwrap();
        let f0 = focal_weighted_ce(&lp, &[1], &w, 0.0, &[true]).unwrap();
        assert_eq!(ce.value, f0.value);
    }

    #[test]
    fn combined_single_stage_without_smoothing_is_cross_entropy() {
        let lp = log_softmax_rows(&SeqMatrix::from_rows(&[[0.3, -1.0], [2.0, 0.1], [0.0, 0.5]]).unwrap());
        let labels = [0, 0, 1];
        let w = ClassWeights::new(vec![1.5, 0.5]).unwrap();
        let cfg = LossConfig { lambda: 0.0, ..LossConfig::default() };
        let c = combined_loss(std::slice::from_ref(&lp), &labels, &w, &cfg, &[true; 3]).unwrap();
        let ce = weighted_cross_entropy(&lp, &labels, &w, &[true; 3]).unwrap();
        assert_eq!(c.value, ce.value);
    }

    #[test]
    fn combined_default_matches_hand_composition() {
        let lp = log_softmax_rows(&SeqMatrix::from_rows(&[[0.3, -1.0], [2.0, 0.1], [0.0, 0.5]]).unwrap());
        let labels = [0, 0, 1];
        let w = ClassWeights::uniform(2);
        let c = combined_loss(std::slice::from_ref(&lp), &labels, &w, &LossConfig::default(), &[true; 3]).unwrap();
        let ce = -(lp.get(0, 0) + lp.get(1, 0) + lp.get(2, 1)) / 3.0;
        let mut sm = 0.0;
        for t in 1..3 {
            for k in 0..2 {
                sm += (lp.get(t, k) - lp.get(t - 1, k)).powi(2);
            }
        }
        sm /= 6.0;
        assert!((c.value - (ce + 0.15 * sm)).abs() < 1e-12);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = RngState::new(17);
        let (t, c) = (6, 3);
        let logits: Vec<f64> = (0..t * c).map(|_| 3.0 * rng.uniform() - 1.5).collect();
        let labels = [0, 2, 1, 1, 0, 2];
        let mask = [true, true, false, true, true, true];
        let w = ClassWeights::new(vec![0.7, 1.3, 2.0]).unwrap();
        for cfg in [
            LossConfig::default(),
            LossConfig { tau: 0.3, ..LossConfig::default() },
            LossConfig { focal_gamma: Some(2.0), ..LossConfig::default() },
        ] {
            // evaluate at genuine log-probabilities, earlier frames frozen
            let lp0 = log_softmax_rows(&SeqMatrix::from_vec(t, c, logits.clone()).unwrap());
            let f = |x: &[f64]| {
                let lp = SeqMatrix::from_vec(t, c, x.to_vec()).unwrap();
                let l = combined_loss_against(
                    std::slice::from_ref(&lp),
                    std::slice::from_ref(&lp0),
                    &labels,
                    &w,
                    &cfg,
                    &mask,
                )
                .unwrap();
                (l.value, l.grads[0].as_slice().to_vec())
            };
            let at_base = combined_loss(std::slice::from_ref(&lp0), &labels, &w, &cfg, &mask).unwrap();
            let frozen =
                combined_loss_against(std::slice::from_ref(&lp0), std::slice::from_ref(&lp0), &labels, &w, &cfg, &mask)
                    .unwrap();
            assert_eq!(at_base.grads[0], frozen.grads[0]);
            let err = grad_check(f, lp0.as_slice(), 1e-6).unwrap();
            assert!(err < 1e-6, "{cfg:?}: {err}");
        }
    }
}
