//! Training loop with validation-based model selection and checkpointing.
//!
//! Everything random in a run is a pure function of the seed and the
//! iteration number: the epoch order, the augmentation draw and the dropout
//! masks of batch slot `b` at iteration `i` come from generators keyed by
//! `(seed, i, b)`. A run resumed from a checkpoint therefore continues
//! exactly as the uninterrupted run would have.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{at_model_rate, validation_scores};
use super::optim::{adamw_step, lr_at, OptimConfig, OptimState};
use super::step::batch_loss_and_grad;
use crate::data::{make_batch, temporal_augment, FeatureSequence};
use crate::error::{Error, Result};
use crate::loss::{median_frequency_weights, ClassWeights, LossConfig};
use crate::model::{ModelConfig, ModelParams, TensorArchive};
use crate::seqcore::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub seed: u64,
    /// Random temporal subsampling of training videos recorded above 5 fps.
    #[serde(default = "yes")]
    pub augment: bool,
    /// Median-frequency class weights; uniform weights when false.
    #[serde(default = "yes")]
    pub class_weighting: bool,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub fn new(model: ModelConfig, optim: OptimConfig, seed: u64) -> Self {
        Self { model, loss: LossConfig::default(), optim, seed, augment: true, class_weighting: true }
    }

    /// Short, high-rate schedule on the desk model, sized so a 5-fold run on
    /// 60 synthetic procedures finishes in minutes.
    pub fn synthetic_benchmark(input_dim: usize, seed: u64) -> Self {
        let optim = OptimConfig {
            lr0: 5e-3,
            total_iters: 150,
            batch_size: 2,
            burn_in_iters: 75,
            eval_every: 25,
            ..OptimConfig::default()
        };
        Self::new(ModelConfig::desk(input_dim), optim, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate()?;
        self.optim.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iter: u64,
    pub wf1: f64,
    pub wjacc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub iterations: Vec<IterRecord>,
    pub evals: Vec<EvalRecord>,
}

impl History {
    /// One JSON object per line: iteration records, then evaluation records.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.iterations {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        for r in &self.evals {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Model, optimizer state and bookkeeping at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub optim: OptimState,
    /// Completed optimizer steps.
    pub iteration: u64,
    /// Validation wF1 at this iteration, if it was evaluated.
    pub valid_wf1: Option<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    format: String,
    config: TrainConfig,
    iteration: u64,
    valid_wf1: Option<f64>,
    seed: u64,
    adam_step: u64,
}

const CHECKPOINT_FORMAT: &str = "colontcn-checkpoint";

impl Checkpoint {
    pub fn to_archive(&self) -> TensorArchive {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            iteration: self.iteration,
            valid_wf1: self.valid_wf1,
            seed: self.seed,
            adam_step: self.optim.step,
        };
        let mut a = TensorArchive::new(serde_json::to_value(header).expect("header serializes"));
        self.params.write_to(&mut a, "");
        self.optim.m.write_to(&mut a, "adam.m/");
        self.optim.v.write_to(&mut a, "adam.v/");
        a
    }

    pub fn from_archive(a: &TensorArchive) -> Result<Self> {
        let h: CheckpointHeader =
            serde_json::from_value(a.header.clone()).map_err(|e| Error::data(format!("checkpoint header: {e}")))?;
        if h.format != CHECKPOINT_FORMAT {
            return Err(Error::data(format!("not a model checkpoint: {}", h.format)));
        }
        h.config.validate()?;
        let mut params = ModelParams::zeros(&h.config.model)?;
        params.read_from(a, "")?;
        let mut optim = OptimState::new(&params);
        optim.step = h.adam_step;
        optim.m.read_from(a, "adam.m/")?;
        optim.v.read_from(a, "adam.v/")?;
        let expected = params.named_tensors().len() * 3;
        if a.tensors.len() != expected {
            return Err(Error::data(format!("checkpoint has {} tensors, model expects {expected}", a.tensors.len())));
        }
        Ok(Self { config: h.config, params, optim, iteration: h.iteration, valid_wf1: h.valid_wf1, seed: h.seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&TensorArchive::load(path)?).map_err(|e| match e {
            Error::Data(m) | Error::Shape(m) | Error::Config(m) => Error::format(path, m),
            e => e,
        })
    }
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Highest validation wF1 at or after the burn-in.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub history: History,
    pub class_weights: ClassWeights,
}

/// Median-frequency weights from the unmasked frames of `train`.
pub fn training_class_weights(train: &[FeatureSequence]) -> Result<ClassWeights> {
    let mut counts = [0u64; 9];
    for s in train {
        for (c, n) in s.class_counts().iter().enumerate() {
            counts[c] += n;
        }
    }
    median_frequency_weights(&counts)
}

/// Position of training video for batch slot `slot` at iteration `iter`.
///
/// Slots are numbered globally (`iter * batch + slot`) and walk through
/// successive epochs, each a fresh permutation seeded by `(seed, epoch)`.
pub fn sample_index(seed: u64, iter: u64, slot: usize, batch: usize, n_train: usize) -> usize {
    let p = iter * batch as u64 + slot as u64;
    let epoch = p / n_train as u64;
    let mut order: Vec<usize> = (0..n_train).collect();
    RngState::new(seed).derive(&[0xe90c, epoch]).shuffle(&mut order);
    order[(p % n_train as u64) as usize]
}

/// Stateful trainer; [`Trainer::run`] finishes the schedule.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    train: &'a [FeatureSequence],
    valid: Vec<FeatureSequence>,
    weights: ClassWeights,
    params: ModelParams,
    optim: OptimState,
    iteration: u64,
    best: Option<Checkpoint>,
    history: History,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, train: &'a [FeatureSequence], valid: &[FeatureSequence]) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(&cfg.model, &RngState::new(cfg.seed).derive(&[0x1a17]))?;
        Self::with_state(cfg, train, valid, params, None, 0, None)
    }

    /// Continues a run from its latest checkpoint and, if one was selected
    /// already, its best checkpoint.
    pub fn resume(
        last: Checkpoint,
        best: Option<Checkpoint>,
        train: &'a [FeatureSequence],
        valid: &[FeatureSequence],
    ) -> Result<Self> {
        let Checkpoint { config, params, optim, iteration, .. } = last;
        Self::with_state(config, train, valid, params, Some(optim), iteration, best)
    }

    fn with_state(
        cfg: TrainConfig,
        train: &'a [FeatureSequence],
        valid: &[FeatureSequence],
        params: ModelParams,
        optim: Option<OptimState>,
        iteration: u64,
        best: Option<Checkpoint>,
    ) -> Result<Self> {
        if train.is_empty() || valid.is_empty() {
            return Err(Error::data("training and validation splits must be non-empty"));
        }
        let d = cfg.model.input_dim();
        if let Some(s) = train.iter().chain(valid).find(|s| s.dim() != d) {
            return Err(Error::data(format!(
                "video {} has feature dimension {}, model expects {d}",
                s.video_id,
                s.dim()
            )));
        }
        let weights = if cfg.class_weighting {
            training_class_weights(train)?
        } else {
            ClassWeights::uniform(cfg.model.num_classes())
        };
        let valid = valid.iter().map(at_model_rate).collect::<Result<_>>()?;
        let optim = optim.unwrap_or_else(|| OptimState::new(&params));
        Ok(Self { cfg, train, valid, weights, params, optim, iteration, best, history: History::default() })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn class_weights(&self) -> &ClassWeights {
        &self.weights
    }

    pub fn best(&self) -> Option<&Checkpoint> {
        self.best.as_ref()
    }

    pub fn checkpoint(&self, valid_wf1: Option<f64>) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            params: self.params.clone(),
            optim: self.optim.clone(),
            iteration: self.iteration,
            valid_wf1,
            seed: self.cfg.seed,
        }
    }

    /// One optimizer step; returns the batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let i = self.iteration;
        let b_size = self.cfg.optim.batch_size;
        let root = RngState::new(self.cfg.seed);
        let mut seqs = Vec::with_capacity(b_size);
        let mut rngs = Vec::with_capacity(b_size);
        for b in 0..b_size {
            let idx = sample_index(self.cfg.seed, i, b, b_size, self.train.len());
            let src = &self.train[idx];
            let seq = if self.cfg.augment {
                temporal_augment(src, &mut root.derive(&[0xa06, i, b as u64]))
            } else {
                at_model_rate(src)?
            };
            seqs.push(seq);
            rngs.push(root.derive(&[0xd50, i, b as u64]));
        }
        let batch = make_batch(&seqs)?;
        let (loss, grads) =
            batch_loss_and_grad(&self.cfg.model, &self.params, &batch, &self.weights, &self.cfg.loss, &rngs, true)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: i, loss });
        }
        let lr = lr_at(i, &self.cfg.optim);
        adamw_step(&mut self.params, &grads, &mut self.optim, lr, &self.cfg.optim)?;
        if !self.params.all_finite() {
            return Err(Error::Diverged { iteration: i, loss });
        }
        self.params.round_to_storage();
        self.optim.round_to_storage();
        self.iteration += 1;
        self.history.iterations.push(IterRecord { iter: self.iteration, lr, loss });
        let o = &self.cfg.optim;
        if self.iteration.is_multiple_of(o.eval_every) || self.iteration == o.total_iters {
            self.evaluate()?;
        }
        Ok(loss)
    }

    fn evaluate(&mut self) -> Result<()> {
        let (wf1, wjacc) = validation_scores(&self.cfg.model, &self.params, &self.valid)?;
        self.history.evals.push(EvalRecord { iter: self.iteration, wf1, wjacc });
        let eligible = self.iteration >= self.cfg.optim.burn_in_iters;
        let better = self.best.as_ref().is_none_or(|b| b.valid_wf1.is_none_or(|s| wf1 > s));
        if eligible && better {
            self.best = Some(self.checkpoint(Some(wf1)));
        }
        Ok(())
    }

    /// Steps until `iteration` (capped at the schedule length).
    pub fn run_until(&mut self, iteration: u64) -> Result<()> {
        let stop = iteration.min(self.cfg.optim.total_iters);
        while self.iteration < stop {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        self.run_until(self.cfg.optim.total_iters)?;
        let last = self.checkpoint(self.history.evals.last().filter(|e| e.iter == self.iteration).map(|e| e.wf1));
        let best = self.best.take().ok_or_else(|| Error::config("no validation evaluation at or after the burn-in"))?;
        Ok(TrainOutcome { best, last, history: self.history, class_weights: self.weights })
    }
}

/// Trains a model from scratch on `train`, selecting on `valid`.
pub fn train(cfg: &TrainConfig, train: &[FeatureSequence], valid: &[FeatureSequence]) -> Result<TrainOutcome> {
    Trainer::new(cfg.clone(), train, valid)?.run()
}
