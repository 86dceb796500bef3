use super::archive::TensorArchive;
use super::config::{ModelConfig, StageConfig};
use crate::error::{Error, Result};
use crate::seqcore::{ConvParams, RngState};

/// What a tensor is, for optimizer treatment (weight decay skips biases).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Direction,
    Gain,
    Bias,
}

impl TensorKind {
    pub fn decays(self) -> bool {
        !matches!(self, TensorKind::Bias)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub conv1: ConvParams,
    pub conv2: Option<ConvParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageParams {
    pub fr: Option<ConvParams>,
    pub blocks: Vec<BlockParams>,
    pub head: ConvParams,
}

/// Every learnable tensor of a (multi-stage) model. The same type doubles as
/// the gradient buffer, see [`ModelParams::zeros_like`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub stages: Vec<StageParams>,
}

fn conv_tensors<'a>(prefix: &str, c: &'a ConvParams, out: &mut Vec<(String, TensorKind, &'a [f64])>) {
    if let Some(g) = &c.gain {
        out.push((format!("{prefix}.v"), TensorKind::Direction, &c.direction));
        out.push((format!("{prefix}.g"), TensorKind::Gain, g));
        out.push((format!("{prefix}.b"), TensorKind::Bias, &c.bias));
    } else {
        out.push((format!("{prefix}.weight"), TensorKind::Weight, &c.direction));
        out.push((format!("{prefix}.bias"), TensorKind::Bias, &c.bias));
    }
}

fn conv_tensors_mut<'a>(prefix: &str, c: &'a mut ConvParams, out: &mut Vec<(String, TensorKind, &'a mut Vec<f64>)>) {
    if let Some(g) = &mut c.gain {
        out.push((format!("{prefix}.v"), TensorKind::Direction, &mut c.direction));
        out.push((format!("{prefix}.g"), TensorKind::Gain, g));
        out.push((format!("{prefix}.b"), TensorKind::Bias, &mut c.bias));
    } else {
        out.push((format!("{prefix}.weight"), TensorKind::Weight, &mut c.direction));
        out.push((format!("{prefix}.bias"), TensorKind::Bias, &mut c.bias));
    }
}

fn block_prefix(s: usize, l: usize, sub: usize) -> String {
    format!("stage{s:02}.block{l:02}.conv{sub}")
}

impl StageParams {
    pub fn zeros(cfg: &StageConfig) -> Result<Self> {
        let f = cfg.block.channels;
        let k = cfg.block.kernel;
        let wn = cfg.block.weight_norm;
        let fr = if cfg.use_fr { Some(ConvParams::zeros(cfg.input_dim, f, 1, 1, false)?) } else { None };
        let mut blocks = Vec::with_capacity(cfg.levels);
        for l in 0..cfg.levels {
            let d = StageConfig::dilation(l);
            let in_ch = if l == 0 { cfg.block_input_dim() } else { f };
            let conv1 = ConvParams::zeros(in_ch, f, k, d, wn)?;
            let conv2 = if cfg.block.double_conv { Some(ConvParams::zeros(f, f, k, d, wn)?) } else { None };
            blocks.push(BlockParams { conv1, conv2 });
        }
        let head_in = if cfg.levels == 0 { cfg.block_input_dim() } else { f };
        let head = ConvParams::zeros(head_in, cfg.num_classes, 1, 1, false)?;
        Ok(Self { fr, blocks, head })
    }

    fn convs(&self) -> Vec<&ConvParams> {
        let mut v: Vec<&ConvParams> = self.fr.iter().collect();
        for b in &self.blocks {
            v.push(&b.conv1);
            v.extend(b.conv2.iter());
        }
        v.push(&self.head);
        v
    }

    fn convs_mut(&mut self) -> Vec<&mut ConvParams> {
        let mut v: Vec<&mut ConvParams> = self.fr.iter_mut().collect();
        for b in &mut self.blocks {
            v.push(&mut b.conv1);
            v.extend(b.conv2.iter_mut());
        }
        v.push(&mut self.head);
        v
    }
}

impl ModelParams {
    /// Allocates every tensor with zeros.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let stages = cfg.stage_configs().iter().map(StageParams::zeros).collect::<Result<_>>()?;
        Ok(Self { stages })
    }

    /// Fan-in scaled uniform initialization.
    ///
    /// Kernels (or weight-norm directions) are drawn from
    /// `U(-sqrt(1/(in*k)), +sqrt(1/(in*k)))`; gains start at the direction
    /// norm so the initial effective kernel equals the draw; biases are zero.
    pub fn init(cfg: &ModelConfig, rng: &RngState) -> Result<Self> {
        let mut params = Self::zeros(cfg)?;
        let mut rng = rng.derive(&[0x1417]);
        for conv in params.convs_mut() {
            let bound = (1.0 / (conv.in_ch * conv.kernel) as f64).sqrt();
            for v in &mut conv.direction {
                *v = (2.0 * rng.uniform() - 1.0) * bound;
            }
            if conv.gain.is_some() {
                let norms = conv.direction_norms();
                conv.gain = Some(norms);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            stages: self
                .stages
                .iter()
                .map(|s| StageParams {
                    fr: s.fr.as_ref().map(ConvParams::zeros_like),
                    blocks: s
                        .blocks
                        .iter()
                        .map(|b| BlockParams {
                            conv1: b.conv1.zeros_like(),
                            conv2: b.conv2.as_ref().map(ConvParams::zeros_like),
                        })
                        .collect(),
                    head: s.head.zeros_like(),
                })
                .collect(),
        }
    }

    pub fn convs(&self) -> Vec<&ConvParams> {
        self.stages.iter().flat_map(StageParams::convs).collect()
    }

    pub fn convs_mut(&mut self) -> Vec<&mut ConvParams> {
        self.stages.iter_mut().flat_map(StageParams::convs_mut).collect()
    }

    /// Number of scalars actually allocated.
    pub fn scalar_count(&self) -> usize {
        self.convs().iter().map(|c| c.param_count()).sum()
    }

    /// All tensors with their names, in lexicographic name order.
    pub fn named_tensors(&self) -> Vec<(String, TensorKind, &[f64])> {
        let mut out = Vec::new();
        for (s, st) in self.stages.iter().enumerate() {
            if let Some(fr) = &st.fr {
                conv_tensors(&format!("stage{s:02}.fr"), fr, &mut out);
            }
            for (l, b) in st.blocks.iter().enumerate() {
                conv_tensors(&block_prefix(s, l, 1), &b.conv1, &mut out);
                if let Some(c2) = &b.conv2 {
                    conv_tensors(&block_prefix(s, l, 2), c2, &mut out);
                }
            }
            conv_tensors(&format!("stage{s:02}.head"), &st.head, &mut out);
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Mutable counterpart of [`named_tensors`](Self::named_tensors), same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, TensorKind, &mut Vec<f64>)> {
        let mut out = Vec::new();
        for (s, st) in self.stages.iter_mut().enumerate() {
            if let Some(fr) = &mut st.fr {
                conv_tensors_mut(&format!("stage{s:02}.fr"), fr, &mut out);
            }
            for (l, b) in st.blocks.iter_mut().enumerate() {
                conv_tensors_mut(&block_prefix(s, l, 1), &mut b.conv1, &mut out);
                if let Some(c2) = &mut b.conv2 {
                    conv_tensors_mut(&block_prefix(s, l, 2), c2, &mut out);
                }
            }
            conv_tensors_mut(&format!("stage{s:02}.head"), &mut st.head, &mut out);
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Concatenation of all tensors in name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.named_tensors().into_iter().flat_map(|(_, _, t)| t.iter().copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, _, t) in self.named_tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat vector length mismatch");
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) {
        for (a, b) in self.convs_mut().into_iter().zip(other.convs()) {
            a.axpy(alpha, b);
        }
    }

    /// Rounds every value to the nearest `f32`, the checkpoint storage precision.
    pub fn round_to_storage(&mut self) {
        for (_, _, t) in self.named_tensors_mut() {
            for v in t.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Copies every tensor into `archive`, names prefixed by `prefix`.
    pub fn write_to(&self, archive: &mut TensorArchive, prefix: &str) {
        for (name, _, t) in self.named_tensors() {
            archive.insert(format!("{prefix}{name}"), t);
        }
    }

    /// Fills every tensor from `archive`; each must exist with the right length.
    pub fn read_from(&mut self, archive: &TensorArchive, prefix: &str) -> Result<()> {
        for (name, _, t) in self.named_tensors_mut() {
            let key = format!("{prefix}{name}");
            let stored = archive.get(&key).ok_or_else(|| Error::data(format!("checkpoint lacks tensor {key}")))?;
            if stored.len() != t.len() {
                return Err(Error::shape(format!(
                    "tensor {key} has {} values, model expects {}",
                    stored.len(),
                    t.len()
                )));
            }
            for (d, &s) in t.iter_mut().zip(stored) {
                *d = s as f64;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.convs().iter().all(|c| {
            c.direction.iter().chain(&c.bias).all(|v| v.is_finite())
                && c.gain.as_ref().is_none_or(|g| g.iter().all(|v| v.is_finite()))
        })
    }
}
