use super::matrix::SeqMatrix;
use super::rng::RngState;
use crate::error::{Error, Result};

pub fn relu(x: &SeqMatrix) -> SeqMatrix {
    x.map(|v| v.max(0.0))
}

/// Passes the cotangent where `x > 0`; the subgradient at zero is zero.
pub fn relu_backward(x: &SeqMatrix, grad_out: &SeqMatrix) -> SeqMatrix {
    assert_eq!(x.shape(), grad_out.shape());
    let data = x.as_slice().iter().zip(grad_out.as_slice()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
    SeqMatrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
}

/// Elementwise multipliers applied by one dropout call: `0` for dropped
/// elements, `1 / (1 - rate)` for survivors. `None` when dropout was a no-op.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    pub fn kept(&self) -> &[bool] {
        &self.keep
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn apply(&self, x: &SeqMatrix) -> SeqMatrix {
        let data = x.as_slice().iter().zip(&self.keep).map(|(&v, &k)| if k { v * self.scale } else { 0.0 }).collect();
        SeqMatrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }
}

/// Inverted dropout. Identity (and no mask) at inference or with `rate == 0`.
pub fn dropout(
    x: &SeqMatrix,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<(SeqMatrix, Option<DropoutMask>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep: Vec<bool> = (0..x.as_slice().len()).map(|_| rng.uniform() >= rate).collect();
    let mask = DropoutMask { keep, scale: 1.0 / (1.0 - rate) };
    Ok((mask.apply(x), Some(mask)))
}

pub fn dropout_backward(mask: Option<&DropoutMask>, grad_out: &SeqMatrix) -> SeqMatrix {
    match mask {
        Some(m) => m.apply(grad_out),
        None => grad_out.clone(),
    }
}

fn row_log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax_rows(x: &SeqMatrix) -> SeqMatrix {
    let mut out = x.clone();
    for t in 0..x.rows() {
        let lse = row_log_sum_exp(x.row(t));
        for v in out.row_mut(t) {
            *v -= lse;
        }
    }
    out
}

pub fn softmax_rows(x: &SeqMatrix) -> SeqMatrix {
    let mut out = x.clone();
    for t in 0..x.rows() {
        let row = out.row_mut(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Cotangent of the logits given the cotangent of `log_softmax(logits)`.
///
/// `probs` is `softmax(logits)`.
pub fn log_softmax_backward(probs: &SeqMatrix, grad_out: &SeqMatrix) -> SeqMatrix {
    let mut out = grad_out.clone();
    for t in 0..probs.rows() {
        let s: f64 = grad_out.row(t).iter().sum();
        for (g, p) in out.row_mut(t).iter_mut().zip(probs.row(t)) {
            *g -= p * s;
        }
    }
    out
}

/// Cotangent of the logits given the cotangent of `softmax(logits)`.
pub fn softmax_backward(probs: &SeqMatrix, grad_out: &SeqMatrix) -> SeqMatrix {
    let mut out = grad_out.clone();
    for t in 0..probs.rows() {
        let dot: f64 = grad_out.row(t).iter().zip(probs.row(t)).map(|(g, p)| g * p).sum();
        for (g, p) in out.row_mut(t).iter_mut().zip(probs.row(t)) {
            *g = p * (*g - dot);
        }
    }
    out
}
