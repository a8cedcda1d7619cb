//! Desk-scale adversarial training and distillation laboratory.
//!
//! The crate bundles a small reverse-mode autodiff core, declarative MLP/CNN
//! models, the loss family used by peer-tutored adversarial distillation,
//! a gradient attack suite (FGSM, PGD, MI-FGSM, CW-l2, unbounded), training
//! loops with stochastic weight averaging and best-checkpoint selection, and
//! an evaluation battery (cross-model robustness, gradient-obfuscation
//! checks, robust-overfitting gap, saliency export).
//!
//! Everything is deterministic under a fixed seed: identical configs produce
//! bit-identical metrics streams and checkpoints.

pub mod cli;
pub mod error;
pub mod tensor;

pub use error::{Error, Result};
