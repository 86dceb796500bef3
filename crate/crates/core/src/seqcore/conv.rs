//! Dilated acausal 1-D convolution with optional weight normalization.
//!
//! The kernel is centered on the output frame: tap `j` of a width-`k` kernel
//! reads input frame `t + (j - (k-1)/2) * dilation`, and frames outside
//! `[0, T)` read as zero. Output length therefore always equals input length.
//!
//! With weight normalization the effective kernel of output channel `o` is
//! `w[o] = g[o] * v[o] / ||v[o]||`, the norm taken over all input channels and
//! taps. The backward pass maps the kernel cotangent back onto `v` and `g`.

use super::gemm::{gemm_acc, Layout};
use super::matrix::SeqMatrix;
use crate::error::{Error, Result};

/// Learnable tensors of one convolution layer.
///
/// `direction` is laid out `[out][in][tap]`. When `gain` is `Some` the layer
/// is weight-normalized and `direction` holds `v`; otherwise `direction` is
/// the kernel itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub direction: Vec<f64>,
    pub gain: Option<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    /// All-zero layer. A weight-normalized zero layer has undefined kernel
    /// norms; fill `direction` before running it.
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize, dilation: usize, weight_norm: bool) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::shape(format!("kernel size {kernel} is even")));
        }
        if dilation == 0 {
            return Err(Error::shape("dilation must be at least 1"));
        }
        if in_ch == 0 || out_ch == 0 {
            return Err(Error::shape("channel counts must be positive"));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            dilation,
            direction: vec![0.0; out_ch * in_ch * kernel],
            gain: weight_norm.then(|| vec![0.0; out_ch]),
            bias: vec![0.0; out_ch],
        })
    }

    /// Same shape, every tensor zero. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self {
            direction: vec![0.0; self.direction.len()],
            gain: self.gain.as_ref().map(|g| vec![0.0; g.len()]),
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn weight_norm(&self) -> bool {
        self.gain.is_some()
    }

    pub fn param_count(&self) -> usize {
        self.direction.len() + self.bias.len() + self.gain.as_ref().map_or(0, Vec::len)
    }

    fn fan(&self) -> usize {
        self.in_ch * self.kernel
    }

    /// Per-output-channel L2 norms of `direction`.
    pub fn direction_norms(&self) -> Vec<f64> {
        self.direction.chunks_exact(self.fan()).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    /// The kernel actually applied to the input.
    pub fn effective_weight(&self) -> Result<Vec<f64>> {
        let Some(gain) = &self.gain else {
            return Ok(self.direction.clone());
        };
        let norms = self.direction_norms();
        let mut w = Vec::with_capacity(self.direction.len());
        for ((v, &g), &n) in self.direction.chunks_exact(self.fan()).zip(gain).zip(&norms) {
            if n <= 0.0 || !n.is_finite() {
                return Err(Error::NonFinite("weight-normalized kernel has zero norm".into()));
            }
            let s = g / n;
            w.extend(v.iter().map(|x| x * s));
        }
        Ok(w)
    }

    fn check_input(&self, x: &SeqMatrix) -> Result<()> {
        if x.cols() != self.in_ch {
            return Err(Error::shape(format!("conv expects {} input channels, got {}", self.in_ch, x.cols())));
        }
        if x.rows() == 0 {
            return Err(Error::shape("empty sequence"));
        }
        Ok(())
    }

    /// Adds `alpha * other` to every tensor. Shapes must match.
    pub fn axpy(&mut self, alpha: f64, other: &ConvParams) {
        axpy(&mut self.direction, alpha, &other.direction);
        axpy(&mut self.bias, alpha, &other.bias);
        if let (Some(g), Some(o)) = (&mut self.gain, &other.gain) {
            axpy(g, alpha, o);
        }
    }
}

pub(crate) fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Frame offset of tap `j` and the output-frame range whose source frame is
/// in bounds.
fn tap_window(j: usize, kernel: usize, dilation: usize, frames: usize) -> (isize, usize, usize) {
    let shift = (j as isize - (kernel / 2) as isize) * dilation as isize;
    let start = (-shift).max(0) as usize;
    let end = (frames as isize - shift.max(0)).max(0) as usize;
    (shift, start.min(frames), end.max(start.min(frames)))
}

/// `out[t, o] = b[o] + sum_{i,j} w[o,i,j] * x[t + (j - (k-1)/2) * d, i]`.
pub fn conv1d_forward(x: &SeqMatrix, p: &ConvParams) -> Result<SeqMatrix> {
    p.check_input(x)?;
    x.ensure_finite("conv input")?;
    let w = p.effective_weight()?;
    Ok(conv_with_weight(x, p, &w))
}

pub(crate) fn conv_with_weight(x: &SeqMatrix, p: &ConvParams, w: &[f64]) -> SeqMatrix {
    let frames = x.rows();
    let (cin, cout, k) = (p.in_ch, p.out_ch, p.kernel);
    let mut out = SeqMatrix::zeros(frames, cout);
    for row in out.as_mut_slice().chunks_exact_mut(cout) {
        row.copy_from_slice(&p.bias);
    }
    for j in 0..k {
        let (shift, start, end) = tap_window(j, k, p.dilation, frames);
        if end <= start {
            continue;
        }
        let src = (start as isize + shift) as usize;
        // out[start..end] += x[src..] * W_j^T, with W_j^T[i][o] = w[o][i][j]
        gemm_acc(
            (end - start, cin, cout),
            x.as_slice(),
            Layout::new(src * cin, cin, 1),
            w,
            Layout::new(j, k, cin * k),
            out.as_mut_slice(),
            Layout::new(start * cout, cout, 1),
        );
    }
    out
}

/// Adjoint of [`conv1d_forward`].
///
/// Parameter gradients are accumulated into `grads` (same shape as `p`);
/// the input gradient is returned.
pub fn conv1d_backward(
    x: &SeqMatrix,
    p: &ConvParams,
    grad_out: &SeqMatrix,
    grads: &mut ConvParams,
) -> Result<SeqMatrix> {
    Ok(conv1d_backward_impl(x, p, grad_out, grads, true)?.expect("input gradient requested"))
}

/// Backward pass that can skip the input cotangent (first layer of a model).
pub(crate) fn conv1d_backward_impl(
    x: &SeqMatrix,
    p: &ConvParams,
    grad_out: &SeqMatrix,
    grads: &mut ConvParams,
    need_input_grad: bool,
) -> Result<Option<SeqMatrix>> {
    p.check_input(x)?;
    if grad_out.shape() != (x.rows(), p.out_ch) {
        return Err(Error::shape(format!(
            "output cotangent is {:?}, expected ({}, {})",
            grad_out.shape(),
            x.rows(),
            p.out_ch
        )));
    }
    if grads.direction.len() != p.direction.len()
        || grads.bias.len() != p.bias.len()
        || grads.weight_norm() != p.weight_norm()
    {
        return Err(Error::shape("gradient buffer does not match parameters"));
    }
    let w = p.effective_weight()?;
    let (grad_x, grad_w) = conv_backward_with_weight(x, p, &w, grad_out, &mut grads.bias, need_input_grad);

    match (&p.gain, &mut grads.gain) {
        (Some(gain), Some(grad_gain)) => {
            // w = g v / n:  dg = <dw, v> / n,  dv = (g / n) dw - (g dg / n^2) v
            let fan = p.fan();
            let norms = p.direction_norms();
            for o in 0..p.out_ch {
                let v = &p.direction[o * fan..(o + 1) * fan];
                let dw = &grad_w[o * fan..(o + 1) * fan];
                let n = norms[o];
                let dg = v.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>() / n;
                grad_gain[o] += dg;
                let a = gain[o] / n;
                let c = gain[o] * dg / (n * n);
                for ((gv, &dwi), &vi) in grads.direction[o * fan..(o + 1) * fan].iter_mut().zip(dw).zip(v) {
                    *gv += a * dwi - c * vi;
                }
            }
        }
        _ => axpy(&mut grads.direction, 1.0, &grad_w),
    }
    Ok(grad_x)
}

/// Returns `(grad_x, grad_w)` for the effective kernel; bias gradient is
/// accumulated into `grad_bias`.
fn conv_backward_with_weight(
    x: &SeqMatrix,
    p: &ConvParams,
    w: &[f64],
    grad_out: &SeqMatrix,
    grad_bias: &mut [f64],
    need_input_grad: bool,
) -> (Option<SeqMatrix>, Vec<f64>) {
    let frames = x.rows();
    let (cin, cout, k) = (p.in_ch, p.out_ch, p.kernel);
    for row in grad_out.iter_rows() {
        for (gb, g) in grad_bias.iter_mut().zip(row) {
            *gb += g;
        }
    }
    let mut grad_x = SeqMatrix::zeros(frames, cin);
    let mut grad_w = vec![0.0; w.len()];
    for j in 0..k {
        let (shift, start, end) = tap_window(j, k, p.dilation, frames);
        if end <= start {
            continue;
        }
        let rows = end - start;
        let src = (start as isize + shift) as usize;
        // grad_x[src..] += grad_out[start..end] * W_j, W_j[o][i] = w[o][i][j]
        if need_input_grad {
            gemm_acc(
                (rows, cout, cin),
                grad_out.as_slice(),
                Layout::new(start * cout, cout, 1),
                w,
                Layout::new(j, cin * k, k),
                grad_x.as_mut_slice(),
                Layout::new(src * cin, cin, 1),
            );
        }
        // grad_W_j[o][i] += sum_t grad_out[t][o] * x[t + shift][i]
        gemm_acc(
            (cout, rows, cin),
            grad_out.as_slice(),
            Layout::new(start * cout, 1, cout),
            x.as_slice(),
            Layout::new(src * cin, cin, 1),
            &mut grad_w,
            Layout::new(j, cin * k, k),
        );
    }
    (need_input_grad.then_some(grad_x), grad_w)
}
