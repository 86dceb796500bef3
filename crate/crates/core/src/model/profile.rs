//! Closed-form model profiling: receptive field, parameter count and
//! forward-pass FLOPs.

use super::config::{ModelConfig, StageConfig};

/// Input frames that can influence one output frame of a stage.
///
/// `1 + convs_per_block * (k - 1) * (2^L - 1)`.
pub fn receptive_field(cfg: &StageConfig) -> u64 {
    let span = (1u64 << cfg.levels) - 1;
    1 + cfg.block.convs_per_block() as u64 * (cfg.block.kernel as u64 - 1) * span
}

/// Receptive field of the stacked stages: each stage widens the window by
/// its own one-sided reach on both sides.
pub fn model_receptive_field(cfg: &ModelConfig) -> u64 {
    1 + cfg.stage_configs().iter().map(|s| receptive_field(s) - 1).sum::<u64>()
}

struct ConvShape {
    in_ch: u64,
    out_ch: u64,
    kernel: u64,
    gains: bool,
}

fn stage_convs(cfg: &StageConfig) -> Vec<ConvShape> {
    let f = cfg.block.channels as u64;
    let k = cfg.block.kernel as u64;
    let wn = cfg.block.weight_norm;
    let mut convs = Vec::new();
    if cfg.use_fr {
        convs.push(ConvShape { in_ch: cfg.input_dim as u64, out_ch: f, kernel: 1, gains: false });
    }
    for l in 0..cfg.levels {
        let in_ch = if l == 0 { cfg.block_input_dim() as u64 } else { f };
        convs.push(ConvShape { in_ch, out_ch: f, kernel: k, gains: wn });
        if cfg.block.double_conv {
            convs.push(ConvShape { in_ch: f, out_ch: f, kernel: k, gains: wn });
        }
    }
    let head_in = if cfg.levels == 0 { cfg.block_input_dim() as u64 } else { f };
    convs.push(ConvShape { in_ch: head_in, out_ch: cfg.num_classes as u64, kernel: 1, gains: false });
    convs
}

/// Exact number of scalar parameters, weight-norm gains included.
pub fn count_params(cfg: &ModelConfig) -> u64 {
    cfg.stage_configs()
        .iter()
        .flat_map(stage_convs)
        .map(|c| c.in_ch * c.out_ch * c.kernel + c.out_ch + if c.gains { c.out_ch } else { 0 })
        .sum()
}

/// Multiply-accumulates per frame over every convolution.
pub fn macs_per_frame(cfg: &ModelConfig) -> u64 {
    cfg.stage_configs().iter().flat_map(stage_convs).map(|c| c.in_ch * c.out_ch * c.kernel).sum()
}

/// Forward-pass floating-point operations at sequence length `frames`,
/// counted as two per convolution multiply-accumulate.
pub fn estimate_flops(cfg: &ModelConfig, frames: u64) -> u64 {
    2 * frames * macs_per_frame(cfg)
}

pub fn estimate_gflops(cfg: &ModelConfig, frames: u64) -> f64 {
    estimate_flops(cfg, frames) as f64 / 1e9
}

/// Sequence length at which [`estimate_gflops`] reports 4.386 for the
/// default 13-level model.
pub const REFERENCE_FRAMES: u64 = 2500;
