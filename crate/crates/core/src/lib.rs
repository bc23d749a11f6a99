//! Finite-key secret-key-rate engine for time-energy high-dimensional QKD.
//!
//! The pipeline runs [`channel`] → [`decoy`] → [`security`], with the
//! measurement overlap from [`overlap`] and parameters from [`config`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod decoy;
pub mod overlap;
pub mod pipeline;
pub mod quad;
pub mod security;

pub use config::{load_config, Config, ConfigDocument, ConfigError};
pub use pipeline::{evaluate, evaluate_observation, evaluate_sampled, Evaluation, PipelineError};
pub use security::{AbortReason, KeyRateReport};
