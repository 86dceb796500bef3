use rayon::prelude::*;

use crate::data::Batch;
use crate::error::Result;
use crate::loss::{combined_loss, ClassWeights, LossConfig};
use crate::model::{model_backward, model_forward_traced, ModelConfig, ModelParams};
use crate::seqcore::{RngState, SeqMatrix};

/// Combined loss of one sequence and its parameter gradient.
#[allow(clippy::too_many_arguments)]
pub fn sequence_loss_and_grad(
    model: &ModelConfig,
    params: &ModelParams,
    x: &SeqMatrix,
    labels: &[usize],
    mask: &[bool],
    weights: &ClassWeights,
    loss: &LossConfig,
    rng: &RngState,
    training: bool,
) -> Result<(f64, ModelParams)> {
    let trace = model_forward_traced(x, model, params, rng, training)?;
    let log_probs: Vec<SeqMatrix> = trace.stages.iter().map(|s| s.log_probs.clone()).collect();
    let l = combined_loss(&log_probs, labels, weights, loss, mask)?;
    let mut grads = params.zeros_like();
    model_backward(x, model, params, &trace, &l.grads, &mut grads)?;
    Ok((l.value, grads))
}

/// Mean loss and gradient over a batch.
///
/// Each entry is processed on its real frames only; `rngs[b]` drives the
/// dropout of entry `b`. Per-entry gradients are summed in batch order.
pub fn batch_loss_and_grad(
    model: &ModelConfig,
    params: &ModelParams,
    batch: &Batch,
    weights: &ClassWeights,
    loss: &LossConfig,
    rngs: &[RngState],
    training: bool,
) -> Result<(f64, ModelParams)> {
    assert_eq!(rngs.len(), batch.len(), "one generator per batch entry");
    let per_entry: Vec<(f64, ModelParams)> = (0..batch.len())
        .into_par_iter()
        .map(|b| {
            let seq = batch.real(b);
            sequence_loss_and_grad(
                model,
                params,
                &seq.features,
                seq.labels,
                seq.mask,
                weights,
                loss,
                &rngs[b],
                training,
            )
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut total = params.zeros_like();
    let mut value = 0.0;
    for (v, g) in &per_entry {
        value += v;
        total.axpy(scale, g);
    }
    Ok((value * scale, total))
}
