//! Framewise F0 synthesis for speaker anonymization.
//!
//! A small feed-forward network regresses normalized log-F0 and a voicing
//! logit from `[x-vector ∥ bottleneck]` frame inputs. Around it sit the
//! pitch metric suite (GPE, FPE, V/UV confusion, pitch correlation), the
//! pool-based pseudo-speaker selector with the shift-and-scale F0 baseline,
//! and a synthetic data generator for desk-scale end-to-end checks.

pub mod anonymize;
pub mod cli;
pub mod error;
pub mod featureio;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
