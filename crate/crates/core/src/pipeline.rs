//! End-to-end evaluation: channel, decoy estimation, key length.

use serde::Serialize;
use thiserror::Error;

use crate::channel::{frame_statistics, sample_session, ChannelObservation};
use crate::config::Config;
use crate::decoy::{estimate, DecoyBounds, DecoyError};
use crate::overlap::{overlap_discrete, OverlapError};
use crate::security::{key_length, KeyRateReport, SecurityError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error(transparent)]
    Decoy(#[from] DecoyError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub report: KeyRateReport,
    pub overlap: f64,
    pub observation: ChannelObservation,
    pub bounds: DecoyBounds,
}

/// Key rate from a given observation.
pub fn evaluate_observation(config: &Config, observation: ChannelObservation) -> Result<Evaluation, PipelineError> {
    let p = &config.protocol;
    let c = overlap_discrete(p.delta, p.beta_d)?;
    let bounds = estimate(&observation, &config.intensities, &config.security, p.delta)?;
    let n_t_mu1 = observation.n_t_mu[0];
    let k = key_length(c, &bounds, n_t_mu1, p, &config.security, config.model.leak_model)?;
    Ok(Evaluation {
        report: KeyRateReport::new(&k, n_t_mu1, bounds.n_t01_lower, &config.session),
        overlap: c,
        observation,
        bounds,
    })
}

/// Key rate from the expected observation of the configured session.
pub fn evaluate(config: &Config) -> Result<Evaluation, PipelineError> {
    let obs = frame_statistics(&config.protocol, &config.intensities, &config.session, &config.model);
    evaluate_observation(config, obs)
}

/// Key rate from a Poisson-sampled session.
pub fn evaluate_sampled(config: &Config, seed: u64) -> Result<Evaluation, PipelineError> {
    let s = sample_session(
        &config.protocol,
        &config.intensities,
        &config.session,
        &config.model,
        seed,
    );
    evaluate_observation(config, s.observation)
}
