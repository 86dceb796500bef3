//! Forward and backward passes of temporal blocks, stages and the
//! multi-stage model.
//!
//! Block, for input `H` of width `F`:
//!
//! ```text
//! C1 = Dropout(ReLU(conv1(H)))
//! C2 = Dropout(ReLU(conv2(C1)))        (double-conv blocks only)
//! H' = ReLU(H + C_last)                (residual blocks)
//! H' = C_last                          (otherwise)
//! ```
//!
//! A stage is `FR -> blocks -> 1x1 head -> softmax`. Refinement stages read
//! the previous stage's probabilities.

use super::config::{ModelConfig, StageConfig};
use super::params::{BlockParams, ModelParams, StageParams};
use crate::error::{Error, Result};
use crate::seqcore::{
    conv1d_backward, conv1d_backward_impl, conv_with_weight, dropout, dropout_backward, log_softmax_backward,
    log_softmax_rows, relu, relu_backward, softmax_backward, ConvParams, DropoutMask, RngState, SeqMatrix,
};

/// Per-stage class probabilities, base stage first.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbOutput {
    pub stages: Vec<SeqMatrix>,
}

impl ProbOutput {
    pub fn last(&self) -> &SeqMatrix {
        self.stages.last().expect("at least one stage")
    }

    /// Per-frame argmax of the last stage.
    pub fn predict(&self) -> Vec<usize> {
        self.last().argmax_rows()
    }
}

#[derive(Clone, Debug)]
struct ConvStep {
    input: SeqMatrix,
    pre: SeqMatrix,
    mask: Option<DropoutMask>,
}

#[derive(Clone, Debug)]
struct BlockTrace {
    steps: Vec<ConvStep>,
    /// Block output; also the post-ReLU sum when residual.
    output: SeqMatrix,
}

/// Everything the backward pass of one stage needs.
#[derive(Clone, Debug)]
pub struct StageTrace {
    fr_pre: Option<SeqMatrix>,
    blocks: Vec<BlockTrace>,
    head_input: SeqMatrix,
    pub logits: SeqMatrix,
    pub log_probs: SeqMatrix,
    pub probs: SeqMatrix,
}

/// Forward trace of the whole model.
#[derive(Clone, Debug)]
pub struct ModelTrace {
    pub stages: Vec<StageTrace>,
}

impl ModelTrace {
    pub fn output(&self) -> ProbOutput {
        ProbOutput { stages: self.stages.iter().map(|s| s.probs.clone()).collect() }
    }
}

fn conv_step(
    x: SeqMatrix,
    conv: &ConvParams,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<(ConvStep, SeqMatrix)> {
    let w = conv.effective_weight()?;
    let pre = conv_with_weight(&x, conv, &w);
    let (out, mask) = dropout(&relu(&pre), rate, rng, training)?;
    Ok((ConvStep { input: x, pre, mask }, out))
}

fn block_forward_traced(
    h_prev: SeqMatrix,
    level: usize,
    cfg: &StageConfig,
    p: &BlockParams,
    rng: &RngState,
    training: bool,
) -> Result<BlockTrace> {
    let rate = cfg.block.dropout;
    let mut rng1 = rng.derive(&[level as u64, 1]);
    let (s1, c1) = conv_step(h_prev, &p.conv1, rate, &mut rng1, training)?;
    let mut steps = vec![s1];
    let mut last = c1;
    if let Some(conv2) = &p.conv2 {
        let mut rng2 = rng.derive(&[level as u64, 2]);
        let (s2, c2) = conv_step(last, conv2, rate, &mut rng2, training)?;
        steps.push(s2);
        last = c2;
    }
    let output = if cfg.has_residual(level) {
        let mut sum = steps[0].input.clone();
        sum.add_assign(&last);
        relu(&sum)
    } else {
        last
    };
    Ok(BlockTrace { steps, output })
}

/// One temporal block at `level` (dilation `2^level`).
pub fn temporal_block_forward(
    h_prev: &SeqMatrix,
    level: usize,
    cfg: &StageConfig,
    p: &BlockParams,
    rng: &RngState,
    training: bool,
) -> Result<SeqMatrix> {
    if h_prev.cols() != p.conv1.in_ch {
        return Err(Error::shape(format!("block {level} expects {} channels, got {}", p.conv1.in_ch, h_prev.cols())));
    }
    Ok(block_forward_traced(h_prev.clone(), level, cfg, p, rng, training)?.output)
}

fn block_backward(
    trace: &BlockTrace,
    level: usize,
    cfg: &StageConfig,
    p: &BlockParams,
    grad_out: &SeqMatrix,
    grads: &mut BlockParams,
) -> Result<SeqMatrix> {
    let residual = cfg.has_residual(level);
    let grad_sum = if residual { relu_backward(&trace.output, grad_out) } else { grad_out.clone() };
    let mut g = grad_sum.clone();
    let convs: Vec<(&ConvParams, &mut ConvParams)> = match (&p.conv2, &mut grads.conv2) {
        (Some(c2), Some(g2)) => vec![(&p.conv1, &mut grads.conv1), (c2, g2)],
        _ => vec![(&p.conv1, &mut grads.conv1)],
    };
    for ((conv, grad_conv), step) in convs.into_iter().zip(&trace.steps).rev() {
        let g_relu = dropout_backward(step.mask.as_ref(), &g);
        let g_pre = relu_backward(&step.pre, &g_relu);
        g = conv1d_backward(&step.input, conv, &g_pre, grad_conv)?;
    }
    if residual {
        g.add_assign(&grad_sum);
    }
    Ok(g)
}

/// Runs one stage keeping every intermediate needed for backward.
pub fn stage_forward_traced(
    x: &SeqMatrix,
    cfg: &StageConfig,
    p: &StageParams,
    rng: &RngState,
    training: bool,
) -> Result<StageTrace> {
    if x.cols() != cfg.input_dim {
        return Err(Error::shape(format!("stage expects {} input channels, got {}", cfg.input_dim, x.cols())));
    }
    let (fr_pre, mut h) = match &p.fr {
        Some(fr) => {
            let w = fr.effective_weight()?;
            let pre = conv_with_weight(x, fr, &w);
            let h = relu(&pre);
            (Some(pre), h)
        }
        None => (None, x.clone()),
    };
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for (level, bp) in p.blocks.iter().enumerate() {
        let trace = block_forward_traced(h, level, cfg, bp, rng, training)?;
        h = trace.output.clone();
        blocks.push(trace);
    }
    let logits = conv_with_weight(&h, &p.head, &p.head.effective_weight()?);
    let log_probs = log_softmax_rows(&logits);
    let probs = log_probs.map(f64::exp);
    Ok(StageTrace { fr_pre, blocks, head_input: h, logits, log_probs, probs })
}

/// Single-stage forward returning `T x C` probabilities.
pub fn stage_forward(
    x: &SeqMatrix,
    cfg: &StageConfig,
    p: &StageParams,
    rng: &RngState,
    training: bool,
) -> Result<SeqMatrix> {
    Ok(stage_forward_traced(x, cfg, p, rng, training)?.probs)
}

/// Backward through one stage.
///
/// `grad_logits` is the cotangent of the head output. Returns the cotangent
/// of the stage input and accumulates parameter gradients into `grads`.
pub fn stage_backward(
    x: &SeqMatrix,
    cfg: &StageConfig,
    p: &StageParams,
    trace: &StageTrace,
    grad_logits: &SeqMatrix,
    grads: &mut StageParams,
) -> Result<SeqMatrix> {
    let mut g = conv1d_backward(&trace.head_input, &p.head, grad_logits, &mut grads.head)?;
    for (level, ((bp, bg), bt)) in p.blocks.iter().zip(grads.blocks.iter_mut()).zip(&trace.blocks).enumerate().rev() {
        g = block_backward(bt, level, cfg, bp, &g, bg)?;
    }
    if let (Some(fr), Some(fr_grad), Some(pre)) = (&p.fr, &mut grads.fr, &trace.fr_pre) {
        let g_pre = relu_backward(pre, &g);
        // the feature layer only ever reads raw inputs, which need no cotangent
        conv1d_backward_impl(x, fr, &g_pre, fr_grad, false)?;
        return Ok(SeqMatrix::zeros(x.rows(), x.cols()));
    }
    Ok(g)
}

fn stage_rng(rng: &RngState, stage: usize) -> RngState {
    rng.derive(&[0x57a6e, stage as u64])
}

/// Forward through every stage with traces.
pub fn model_forward_traced(
    x: &SeqMatrix,
    cfg: &ModelConfig,
    params: &ModelParams,
    rng: &RngState,
    training: bool,
) -> Result<ModelTrace> {
    let stage_cfgs = cfg.stage_configs();
    if stage_cfgs.len() != params.stages.len() {
        return Err(Error::shape("parameters do not match the model configuration"));
    }
    let mut stages: Vec<StageTrace> = Vec::with_capacity(stage_cfgs.len());
    for (s, (scfg, sp)) in stage_cfgs.iter().zip(&params.stages).enumerate() {
        let input = match stages.last() {
            Some(prev) => &prev.probs,
            None => x,
        };
        let trace = stage_forward_traced(input, scfg, sp, &stage_rng(rng, s), training)?;
        stages.push(trace);
    }
    Ok(ModelTrace { stages })
}

/// All stage outputs for one sequence.
pub fn multistage_forward(
    x: &SeqMatrix,
    cfg: &ModelConfig,
    params: &ModelParams,
    rng: &RngState,
    training: bool,
) -> Result<ProbOutput> {
    let stage_cfgs = cfg.stage_configs();
    if stage_cfgs.len() != params.stages.len() {
        return Err(Error::shape("parameters do not match the model configuration"));
    }
    let mut outputs: Vec<SeqMatrix> = Vec::with_capacity(stage_cfgs.len());
    for (s, (scfg, sp)) in stage_cfgs.iter().zip(&params.stages).enumerate() {
        let input = outputs.last().unwrap_or(x);
        let probs = stage_forward(input, scfg, sp, &stage_rng(rng, s), training)?;
        outputs.push(probs);
    }
    Ok(ProbOutput { stages: outputs })
}

/// Backward through all stages.
///
/// `grad_log_probs[s]` is the loss cotangent of stage `s`'s log-probabilities.
pub fn model_backward(
    x: &SeqMatrix,
    cfg: &ModelConfig,
    params: &ModelParams,
    trace: &ModelTrace,
    grad_log_probs: &[SeqMatrix],
    grads: &mut ModelParams,
) -> Result<()> {
    let stage_cfgs = cfg.stage_configs();
    if grad_log_probs.len() != trace.stages.len() {
        return Err(Error::shape("one loss cotangent per stage is required"));
    }
    // cotangent of stage s probabilities flowing back from stage s + 1
    let mut grad_probs: Option<SeqMatrix> = None;
    for s in (0..stage_cfgs.len()).rev() {
        let st = &trace.stages[s];
        let mut grad_logits = log_softmax_backward(&st.probs, &grad_log_probs[s]);
        if let Some(gp) = grad_probs.take() {
            grad_logits.add_assign(&softmax_backward(&st.probs, &gp));
        }
        let input = if s == 0 { x } else { &trace.stages[s - 1].probs };
        let g_in = stage_backward(input, &stage_cfgs[s], &params.stages[s], st, &grad_logits, &mut grads.stages[s])?;
        if s > 0 {
            grad_probs = Some(g_in);
        }
    }
    Ok(())
}
