//! Optimization: AdamW with a linear schedule, the training loop with
//! validation-based selection and resumable checkpoints, fold construction
//! and the cross-validation harness.

mod cv;
mod eval;
mod folds;
mod optim;
mod step;
mod trainer;

pub use cv::{run_cv, summarize, CvReport, CvRun, CvSummary, FoldReport};
pub use eval::{at_model_rate, evaluate_model, predict_probabilities, predict_sequence, validation_scores};
pub use folds::{five_fold, four_fold, load_folds, save_folds, validate_folds, FoldScheme, FoldSpec};
pub use optim::{adamw_step, adamw_update, lr_at, OptimConfig, OptimState};
pub use step::{batch_loss_and_grad, sequence_loss_and_grad};
pub use trainer::{
    sample_index, train, training_class_weights, Checkpoint, EvalRecord, History, IterRecord, TrainConfig,
    TrainOutcome, Trainer,
};
