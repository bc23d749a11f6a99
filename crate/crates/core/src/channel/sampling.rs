//! Seeded Poisson-sampled sessions for Monte Carlo checks of the decoy bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::{dark_click_probability, mixed_sigma2, pair_yield, sigma_w_expected, transmittance, ChannelObservation};
use crate::config::{IntensityProfile, ModelOptions, ProtocolParams, SessionSpec};

/// Pair-number classes tracked explicitly; the last class absorbs the rest.
const PAIR_CLASSES: usize = 16;

/// A sampled session together with the hidden per-pair-number counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSession {
    pub observation: ChannelObservation,
    /// Time-basis coincidences from vacuum frames (dark clicks only).
    pub s_t0: f64,
    /// Time-basis coincidences from single-pair frames.
    pub s_t1: f64,
    /// Conjugate-basis coincidences from single-pair frames.
    pub s_w1: f64,
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("probability in (0,1)").sample(rng)
}

/// Splits `n` trials over categories with probabilities `probs` (summing to
/// at most 1; the last category takes the remainder).
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(probs.len());
    let mut rest = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(rest);
            break;
        }
        let k = if mass > 0.0 {
            binomial(rng, rest, (p / mass).min(1.0))
        } else {
            0
        };
        out.push(k);
        rest -= k;
        mass -= p;
    }
    out
}

fn poisson_classes(mu: f64) -> Vec<f64> {
    let mut probs = Vec::with_capacity(PAIR_CLASSES);
    let mut p = (-mu).exp();
    for n in 0..PAIR_CLASSES {
        probs.push(p);
        p *= mu / (n + 1) as f64;
    }
    probs
}

/// Coincidences per pair-number class for `frames` basis-matched frames.
fn detect(rng: &mut ChaCha8Rng, frames: u64, mu: f64, eta_a: f64, eta_b: f64, y: f64) -> Vec<u64> {
    multinomial(rng, frames, &poisson_classes(mu))
        .into_iter()
        .enumerate()
        .map(|(n, m)| binomial(rng, m, pair_yield(n as u32, eta_a, eta_b, y)))
        .collect()
}

/// Draws one session: intensity choices, basis choices, pair numbers and
/// detections are all sampled, so the counts carry finite-size noise.
pub fn sample_session(
    params: &ProtocolParams,
    profile: &IntensityProfile,
    session: &SessionSpec,
    model: &ModelOptions,
    seed: u64,
) -> SampledSession {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta_a = params.eta_d;
    let eta_b = transmittance(session.distance_km, params);
    let y = dark_click_probability(params);
    let timing = sigma_w_expected(params);
    let q = params.q;

    let pulses = multinomial(&mut rng, session.block_size.round() as u64, &profile.p_mu);
    let mut n_t = [0.0; 3];
    let mut n_w = [0.0; 3];
    let mut s2 = [0.0; 3];
    let (mut s_t0, mut s_t1, mut s_w1) = (0u64, 0u64, 0u64);
    for k in 0..3 {
        let mu = profile.mu[k];
        let tt = binomial(&mut rng, pulses[k], q * q);
        let ww = binomial(&mut rng, pulses[k] - tt, (1.0 - q) * (1.0 - q) / (1.0 - q * q));
        let t = detect(&mut rng, tt, mu, eta_a, eta_b, y);
        let w = detect(&mut rng, ww, mu, eta_a, eta_b, y);
        s_t0 += t[0];
        s_t1 += t[1];
        s_w1 += w[1];
        n_t[k] = t.iter().sum::<u64>() as f64;
        n_w[k] = w.iter().sum::<u64>() as f64;
        s2[k] = mixed_sigma2(w[1] as f64, n_w[k], &timing, model.multi_pair_timing);
    }
    SampledSession {
        observation: ChannelObservation::new(n_t, n_w, s2),
        s_t0: s_t0 as f64,
        s_t1: s_t1 as f64,
        s_w1: s_w1 as f64,
    }
}
