//! Temporal segmentation of long per-frame feature sequences with dilated
//! acausal temporal convolutional networks (ColonTCN / MS-ColonTCN).
//!
//! The crate is organized bottom-up:
//!
//! - [`seqcore`]: convolution, activation, dropout and softmax kernels with
//!   hand-written backward passes and a finite-difference checker.
//! - [`model`]: temporal blocks, stages, multi-stage refinement, profiling
//!   and the checkpoint container.
//! - [`loss`]: weighted cross-entropy, truncated MSE smoothing, focal loss.
//! - [`metrics`]: per-class F1 / Jaccard, weighted averages, withdrawal-time
//!   error.
//! - [`data`]: annotations, feature files, resampling, augmentation,
//!   batching and a synthetic procedure generator.
//! - [`train`]: AdamW, the training loop and the cross-validation harness.

pub mod binio;
pub mod data;
mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod seqcore;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
