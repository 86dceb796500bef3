use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr0: f64,
    pub lr_final: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub total_iters: u64,
    pub batch_size: usize,
    /// Checkpoints before this iteration are never selected.
    pub burn_in_iters: u64,
    /// Validation cadence in iterations; the final iteration is always
    /// evaluated.
    pub eval_every: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr0: 5e-4,
            lr_final: 1e-6,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            total_iters: 30_000,
            batch_size: 6,
            burn_in_iters: 5_000,
            eval_every: 250,
        }
    }
}

impl OptimConfig {
    /// Shortened schedule for desk-scale runs.
    pub fn desk() -> Self {
        Self { total_iters: 3_000, burn_in_iters: 500, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.lr0 > 0.0 && self.lr_final >= 0.0 && self.lr_final <= self.lr0) {
            return bad(format!("need 0 <= lr_final <= lr0, got {} and {}", self.lr_final, self.lr0));
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be nonnegative".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return bad("betas must lie in [0, 1) and eps be positive".into());
        }
        if self.total_iters == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("total_iters, batch_size and eval_every must be positive".into());
        }
        if self.burn_in_iters > self.total_iters {
            return bad(format!("burn_in_iters {} exceeds total_iters {}", self.burn_in_iters, self.total_iters));
        }
        Ok(())
    }
}

/// Learning rate used by the update that follows `iter` completed steps:
/// linear from `lr0` at 0 to `lr_final` at `total_iters`.
pub fn lr_at(iter: u64, cfg: &OptimConfig) -> f64 {
    let frac = iter.min(cfg.total_iters) as f64 / cfg.total_iters as f64;
    cfg.lr0 + (cfg.lr_final - cfg.lr0) * frac
}

/// Adam moment buffers, congruent with the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: ModelParams,
    pub v: ModelParams,
}

impl OptimState {
    pub fn new(params: &ModelParams) -> Self {
        Self { step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn round_to_storage(&mut self) {
        self.m.round_to_storage();
        self.v.round_to_storage();
    }
}

/// One AdamW update of a flat tensor. `step` is the 1-based step index used
/// for bias correction.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    cfg: &OptimConfig,
    decay: bool,
) {
    let bc1 = 1.0 - cfg.beta1.powf(step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(step as f64);
    let wd = if decay { cfg.weight_decay } else { 0.0 };
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + wd * theta[i]);
    }
}

/// AdamW step over every tensor; biases are not decayed.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimState,
    lr: f64,
    cfg: &OptimConfig,
) -> Result<()> {
    let g = grads.named_tensors();
    if let Some((name, _, _)) = g.iter().find(|(_, _, t)| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    let theta = params.named_tensors_mut();
    if theta.len() != g.len() {
        return Err(Error::shape("gradient does not match the parameters"));
    }
    state.step += 1;
    let step = state.step;
    let m = state.m.named_tensors_mut();
    let v = state.v.named_tensors_mut();
    for ((((name, kind, th), (gname, _, gt)), (_, _, mt)), (_, _, vt)) in theta.into_iter().zip(&g).zip(m).zip(v) {
        if name != *gname || th.len() != gt.len() || mt.len() != th.len() || vt.len() != th.len() {
            return Err(Error::shape(format!("tensor {name} does not match its gradient or state")));
        }
        adamw_update(th, gt, mt, vt, step, lr, cfg, kind.decays());
    }
    Ok(())
}
