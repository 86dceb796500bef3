use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of model classes (outside, insertion, seven colon segments).
pub const NUM_CLASSES: usize = 9;

/// Input feature size of the frame encoder the defaults are tuned for.
pub const DEFAULT_FEATURE_DIM: usize = 2048;

/// Layout of every temporal block in a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockConfig {
    pub kernel: usize,
    pub channels: usize,
    pub dropout: f64,
    /// Two conv sublayers per block instead of one.
    pub double_conv: bool,
    pub residual: bool,
    pub weight_norm: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self { kernel: 7, channels: 64, dropout: 0.5, double_conv: true, residual: true, weight_norm: true }
    }
}

impl BlockConfig {
    pub fn convs_per_block(&self) -> usize {
        if self.double_conv {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::config(format!("kernel size {} must be odd", self.kernel)));
        }
        if self.channels == 0 {
            return Err(Error::config("block channels must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// One TCN stage: optional feature reduction, `levels` temporal blocks with
/// dilations `1, 2, 4, ..., 2^(levels-1)`, then a 1x1 classification head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub levels: usize,
    pub input_dim: usize,
    /// 1x1 conv + ReLU mapping `input_dim` to the block width.
    pub use_fr: bool,
    pub block: BlockConfig,
    pub num_classes: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            levels: 13,
            input_dim: DEFAULT_FEATURE_DIM,
            use_fr: true,
            block: BlockConfig::default(),
            num_classes: NUM_CLASSES,
        }
    }
}

impl StageConfig {
    pub fn dilation(level: usize) -> usize {
        1usize << level
    }

    /// Channel count entering the first temporal block.
    pub fn block_input_dim(&self) -> usize {
        if self.use_fr {
            self.block.channels
        } else {
            self.input_dim
        }
    }

    /// Whether block `level` adds its input back. A block whose input width
    /// differs from the block width has nothing to add and skips it.
    pub fn has_residual(&self, level: usize) -> bool {
        self.block.residual && (level > 0 || self.block_input_dim() == self.block.channels)
    }

    pub fn validate(&self) -> Result<()> {
        self.block.validate()?;
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("input_dim and num_classes must be positive"));
        }
        if self.levels >= usize::BITS as usize - 1 {
            return Err(Error::config(format!("{} levels is too deep", self.levels)));
        }
        Ok(())
    }
}

/// Refinement stages appended after the base stage. Each takes the previous
/// stage's class probabilities as input, has no feature reduction, reuses the
/// base block layout and owns its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    pub levels: usize,
    pub stages: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base: StageConfig,
    pub refinement: Option<RefinementConfig>,
}

impl ModelConfig {
    /// Single-stage model with the default block and `levels` blocks.
    pub fn single_stage(levels: usize, input_dim: usize) -> Self {
        Self { base: StageConfig { levels, input_dim, ..StageConfig::default() }, refinement: None }
    }

    /// Plain stacked dilated convs: one conv per block, no residual path.
    pub fn plain_tcn(levels: usize, input_dim: usize) -> Self {
        let mut cfg = Self::single_stage(levels, input_dim);
        cfg.base.block.double_conv = false;
        cfg.base.block.residual = false;
        cfg
    }

    /// Desk-scale single stage: 6 levels of width 32, dropout 0.2.
    pub fn desk(input_dim: usize) -> Self {
        let mut cfg = Self::single_stage(6, input_dim);
        cfg.base.block.channels = 32;
        cfg.base.block.dropout = 0.2;
        cfg
    }

    pub fn with_refinement(mut self, levels: usize, stages: usize) -> Self {
        self.refinement = Some(RefinementConfig { levels, stages });
        self
    }

    pub fn num_classes(&self) -> usize {
        self.base.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.base.input_dim
    }

    pub fn refinement_stages(&self) -> usize {
        self.refinement.as_ref().map_or(0, |r| r.stages)
    }

    pub fn num_stages(&self) -> usize {
        1 + self.refinement_stages()
    }

    /// Fully resolved per-stage configurations, base first.
    pub fn stage_configs(&self) -> Vec<StageConfig> {
        let mut out = vec![self.base.clone()];
        if let Some(r) = &self.refinement {
            for _ in 0..r.stages {
                out.push(StageConfig {
                    levels: r.levels,
                    input_dim: self.base.num_classes,
                    use_fr: false,
                    block: self.base.block.clone(),
                    num_classes: self.base.num_classes,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for s in self.stage_configs() {
            s.validate()?;
        }
        Ok(())
    }
}
