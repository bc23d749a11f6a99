//! Expected coincidence statistics for a fiber link.
//!
//! Pairs per pulse are Poisson(μ). Alice detects her photon with efficiency
//! `eta_d`; Bob's photon additionally crosses the fiber. Given `n` pairs, the
//! two arms click independently, so a frame with `n` pairs yields a
//! coincidence with probability `Y_n = P_A(n) P_B(n)`. Averaging over the
//! Poisson pair number keeps the correlation between arms that share a pair.

mod sampling;

pub use sampling::{sample_session, SampledSession};

use serde::{Deserialize, Serialize};

use crate::config::{IntensityProfile, LeakModel, ModelOptions, MultiPairTiming, ProtocolParams, SessionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservation {
    /// Time-basis coincidences per intensity.
    pub n_t_mu: [f64; 3],
    /// Conjugate-basis coincidences per intensity.
    pub n_w_mu: [f64; 3],
    /// Conjugate-basis mean-squared time difference per intensity (ps²).
    pub sigma2_w_mu: [f64; 3],
    pub n_t_total: f64,
    pub n_w_total: f64,
}

impl ChannelObservation {
    pub fn new(n_t_mu: [f64; 3], n_w_mu: [f64; 3], sigma2_w_mu: [f64; 3]) -> Self {
        ChannelObservation {
            n_t_mu,
            n_w_mu,
            sigma2_w_mu,
            n_t_total: n_t_mu.iter().sum(),
            n_w_total: n_w_mu.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingModel {
    /// T-basis time-difference standard deviation (ps).
    pub sigma_t: f64,
    /// Single-pair W-basis mean-squared difference (ps²).
    pub sigma_w_single: f64,
    /// Accidental W-basis mean-squared difference (ps²).
    pub sigma_w_multi: f64,
}

/// Bob's end-to-end efficiency, `eta_d · 10^(-alpha L / 10)`.
pub fn transmittance(distance_km: f64, params: &ProtocolParams) -> f64 {
    params.eta_d * 10f64.powf(-params.alpha * distance_km / 10.0)
}

/// Jitter enters both bases as two independent detector contributions.
/// Accidentals are two independent uniform times within a frame.
pub fn sigma_w_expected(params: &ProtocolParams) -> TimingModel {
    let jit2 = 2.0 * params.sigma_jit * params.sigma_jit;
    let cor2 = params.sigma_cor * params.sigma_cor;
    let dispersion = params.beta_d * params.beta_d / (16.0 * params.sigma_coh * params.sigma_coh);
    TimingModel {
        sigma_t: (cor2 + jit2).sqrt(),
        sigma_w_single: cor2 + dispersion + jit2,
        sigma_w_multi: params.frame() * params.frame() / 6.0,
    }
}

/// Dark-click probability of one detector within one frame.
pub fn dark_click_probability(params: &ProtocolParams) -> f64 {
    params.y0 * params.frame() * 1e-12
}

/// Coincidence probability for a frame carrying exactly `n` pairs.
pub fn pair_yield(n: u32, eta_a: f64, eta_b: f64, y: f64) -> f64 {
    let arm = |eta: f64| 1.0 - (1.0 - y) * (1.0 - eta).powi(n as i32);
    arm(eta_a) * arm(eta_b)
}

/// Coincidence probability per frame at mean pair number `mu`.
///
/// Equals `1 - (1-y)(e^{-μη_A} + e^{-μη_B}) + (1-y)² e^{-μ(η_A+η_B-η_Aη_B)}`,
/// rearranged as a sum of non-negative terms to avoid cancellation.
pub fn coincidence_probability(mu: f64, eta_a: f64, eta_b: f64, y: f64) -> f64 {
    let a = (-mu * eta_a).exp();
    let b = (-mu * eta_b).exp();
    let p_a = -(-mu * eta_a).exp_m1() + y * a;
    let p_b = -(-mu * eta_b).exp_m1() + y * b;
    p_a * p_b + (1.0 - y) * (1.0 - y) * a * b * (mu * eta_a * eta_b).exp_m1()
}

/// Mixture of single-pair and accidental spreads for a conjugate-basis
/// sample in which `single` of `total` coincidences come from one pair.
pub fn mixed_sigma2(single: f64, total: f64, timing: &TimingModel, model: MultiPairTiming) -> f64 {
    let multi = match model {
        MultiPairTiming::Uniform => timing.sigma_w_multi,
        MultiPairTiming::Correlated => timing.sigma_w_single,
    };
    if total <= 0.0 {
        return timing.sigma_w_single;
    }
    let w = (single / total).min(1.0);
    w * timing.sigma_w_single + (1.0 - w) * multi
}

/// Pre-rounding expected coincidences for intensity `mu` over `pulses`
/// pulses: `(time basis, conjugate basis, single-pair fraction)`.
pub fn expected_counts(params: &ProtocolParams, mu: f64, pulses: f64, eta_b: f64) -> (f64, f64, f64) {
    let y = dark_click_probability(params);
    let q = params.q;
    let p_c = coincidence_probability(mu, params.eta_d, eta_b, y);
    let single = mu * (-mu).exp() * pair_yield(1, params.eta_d, eta_b, y);
    let fraction = if p_c > 0.0 { (single / p_c).min(1.0) } else { 0.0 };
    (pulses * q * q * p_c, pulses * (1.0 - q) * (1.0 - q) * p_c, fraction)
}

/// Expected observation of one session, with counts rounded to whole
/// coincidences.
pub fn frame_statistics(
    params: &ProtocolParams,
    profile: &IntensityProfile,
    session: &SessionSpec,
    model: &ModelOptions,
) -> ChannelObservation {
    let eta_b = transmittance(session.distance_km, params);
    let timing = sigma_w_expected(params);
    let mut n_t = [0.0; 3];
    let mut n_w = [0.0; 3];
    let mut s2 = [0.0; 3];
    for k in 0..3 {
        let pulses = session.block_size * profile.p_mu[k];
        let (t, w, fraction) = expected_counts(params, profile.mu[k], pulses, eta_b);
        n_t[k] = t.round();
        n_w[k] = w.round();
        s2[k] = if w > 0.0 {
            mixed_sigma2(fraction * w, w, &timing, model.multi_pair_timing)
        } else {
            timing.sigma_w_single
        };
    }
    ChannelObservation::new(n_t, n_w, s2)
}

/// Gaussian timing-channel information per coincidence,
/// `log2(T_f / (sqrt(2πe) σ_t))`, clamped to `[0, log2(T_f/δ)]`.
pub fn mutual_information_bits(params: &ProtocolParams) -> f64 {
    let sigma_t = sigma_w_expected(params).sigma_t;
    let i = (params.frame() / ((2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt() * sigma_t)).log2();
    i.max(0.0).min(params.alphabet_bits())
}

/// Information per coincidence available to reconciliation under `model`.
pub fn reconciliation_information_bits(params: &ProtocolParams, model: LeakModel) -> f64 {
    match model {
        LeakModel::Gaussian => mutual_information_bits(params),
        LeakModel::Alphabet => params.alphabet_bits(),
    }
}
