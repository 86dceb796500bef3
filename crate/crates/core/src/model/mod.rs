//! ColonTCN and MS-ColonTCN: feature reduction, residual dilated temporal
//! blocks, softmax head, and stacked refinement stages.

mod archive;
mod config;
mod forward;
mod params;
mod profile;

pub use archive::{TensorArchive, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use config::{BlockConfig, ModelConfig, RefinementConfig, StageConfig, DEFAULT_FEATURE_DIM, NUM_CLASSES};
pub use forward::{
    model_backward, model_forward_traced, multistage_forward, stage_backward, stage_forward, stage_forward_traced,
    temporal_block_forward, ModelTrace, ProbOutput, StageTrace,
};
pub use params::{BlockParams, ModelParams, StageParams, TensorKind};
pub use profile::{
    count_params, estimate_flops, estimate_gflops, macs_per_frame, model_receptive_field, receptive_field,
    REFERENCE_FRAMES,
};

use crate::error::Result;
use crate::seqcore::{RngState, SeqMatrix};

/// Feature-reduction layer alone: 1x1 conv followed by ReLU.
pub fn fr_forward(x: &SeqMatrix, fr: &crate::seqcore::ConvParams) -> Result<SeqMatrix> {
    Ok(crate::seqcore::relu(&crate::seqcore::conv1d_forward(x, fr)?))
}

/// A configured model with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ColonTcn {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl ColonTcn {
    pub fn new(config: ModelConfig, rng: &RngState) -> Result<Self> {
        let params = ModelParams::init(&config, rng)?;
        Ok(Self { config, params })
    }

    /// Inference pass (dropout off) over one sequence.
    pub fn forward(&self, x: &SeqMatrix) -> Result<ProbOutput> {
        multistage_forward(x, &self.config, &self.params, &RngState::new(0), false)
    }

    /// Per-frame class with the highest final-stage probability.
    pub fn predict(&self, x: &SeqMatrix) -> Result<Vec<usize>> {
        Ok(self.forward(x)?.predict())
    }
}
