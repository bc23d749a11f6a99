//! Finite-key secret-key length and its ingredients.

use serde::Serialize;
use thiserror::Error;

use crate::channel::reconciliation_information_bits;
use crate::config::{LeakModel, ProtocolParams, SecurityBudget, SessionSpec};
use crate::decoy::DecoyBounds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("cross-frame term makes the fluctuation undefined (eps_s/4 - 2f = {margin:e})")]
    InfeasiblePAlpha { margin: f64 },
    #[error("overlap c = {0} must lie in (0,1)")]
    InvalidOverlap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    None,
    DistanceExceeded,
    ThresholdBelowDmin,
    NonpositiveKey,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::None => "none",
            AbortReason::DistanceExceeded => "distance-exceeded",
            AbortReason::ThresholdBelowDmin => "threshold-below-dmin",
            AbortReason::NonpositiveKey => "nonpositive-key",
        }
    }
}

/// `γ(x) = (x + √(1+x²)) (x/(√(1+x²) - 1))^x`, with `γ(0) = 1`.
///
/// The base is rewritten as `(√(1+x²) + 1)/x` to avoid cancellation near 0.
pub fn gamma(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let s = x.hypot(1.0);
    (x + s) * (x * ((s + 1.0) / x).ln()).exp()
}

/// Bits published to verify the reconciled key, `⌈log2(1/ε_hash)⌉`.
pub fn hash_bits(eps_hash: f64) -> f64 {
    (1.0 / eps_hash).log2().ceil()
}

/// Statistical fluctuation Δ of the conjugate-basis distance (bins).
pub fn delta_fluctuation(params: &ProtocolParams, n_t01_lower: f64, eps_s: f64) -> Result<f64, SecurityError> {
    let n = n_t01_lower;
    let f = if params.p_alpha > 0.0 {
        (-2.0 * (n * (-params.p_alpha).ln_1p()).exp_m1()).sqrt()
    } else {
        0.0
    };
    let margin = eps_s / 4.0 - 2.0 * f;
    if !(margin > 0.0) {
        return Err(SecurityError::InfeasiblePAlpha { margin });
    }
    let q = params.q;
    let denom = q * q * (1.0 - q) * (1.0 - q) * n;
    Ok(params.alphabet_size() * ((1.0 / margin).ln() / denom).sqrt())
}

/// Reconciliation leakage: `n (log2(T_f/δ) - β_e I) + hash bits`, never
/// below the hash bits.
pub fn leak_ec(params: &ProtocolParams, n_t_mu1: f64, eps_hash: f64, model: LeakModel) -> f64 {
    let info = reconciliation_information_bits(params, model);
    leak_ec_with_information(params, n_t_mu1, eps_hash, info)
}

pub fn leak_ec_with_information(params: &ProtocolParams, n_t_mu1: f64, eps_hash: f64, info: f64) -> f64 {
    let h = hash_bits(eps_hash);
    (n_t_mu1 * (params.alphabet_bits() - params.beta_e * info) + h).max(h)
}

/// Smallest conjugate-basis distance (bins) compatible with an honest
/// biphoton source; thresholds at or below it always abort.
pub fn d_min(params: &ProtocolParams) -> f64 {
    let coh2 = params.sigma_coh * params.sigma_coh;
    let num = 16.0 * coh2 * params.sigma_cor * params.sigma_cor + params.beta_d * params.beta_d;
    (num / (8.0 * std::f64::consts::PI * coh2 * params.delta * params.delta)).sqrt()
}

/// Inputs of the key-length assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyLengthInputs {
    pub c: f64,
    pub n_t01_lower: f64,
    pub n_t_mu1: f64,
    pub d0: f64,
    pub delta_fluct: f64,
    pub leak_ec_bits: f64,
    pub eps_s: f64,
    pub eps_c: f64,
    /// `log2(T_f/δ)`.
    pub alphabet_bits: f64,
    pub d_min: f64,
    pub d_w1_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyLength {
    /// Final key length (bits), zero on abort.
    pub ell_bits: f64,
    /// Sum of the four terms before clamping and capping.
    pub ell_raw_bits: f64,
    pub uncertainty_term: f64,
    pub gamma_term: f64,
    pub leak_ec_bits: f64,
    pub eps_term: f64,
    pub delta_fluct: f64,
    pub d0: f64,
    pub d_min: f64,
    pub d_w1_upper: f64,
    pub abort_reason: AbortReason,
}

/// `ℓ = -n̲_01 log2 c - n_μ1 log2 γ(d0+Δ) - leak + log2(ε_s² ε_c)`, clamped at
/// zero and capped at the raw alphabet entropy of the μ₁ coincidences.
pub fn assemble_key_length(i: &KeyLengthInputs) -> Result<KeyLength, SecurityError> {
    if !(i.c > 0.0 && i.c < 1.0) {
        return Err(SecurityError::InvalidOverlap(i.c));
    }
    let uncertainty_term = i.n_t01_lower * -i.c.log2();
    let gamma_term = i.n_t_mu1 * gamma(i.d0 + i.delta_fluct).log2();
    let eps_term = (i.eps_s * i.eps_s * i.eps_c).log2();
    let raw = uncertainty_term - gamma_term - i.leak_ec_bits + eps_term;
    let abort_reason = if i.d0 <= i.d_min {
        AbortReason::ThresholdBelowDmin
    } else if !(i.d_w1_upper <= i.d0) {
        AbortReason::DistanceExceeded
    } else if !(raw > 0.0) {
        AbortReason::NonpositiveKey
    } else {
        AbortReason::None
    };
    let ell_bits = if abort_reason == AbortReason::None {
        raw.min(i.n_t_mu1 * i.alphabet_bits)
    } else {
        0.0
    };
    Ok(KeyLength {
        ell_bits,
        ell_raw_bits: raw,
        uncertainty_term,
        gamma_term,
        leak_ec_bits: i.leak_ec_bits,
        eps_term,
        delta_fluct: i.delta_fluct,
        d0: i.d0,
        d_min: i.d_min,
        d_w1_upper: i.d_w1_upper,
        abort_reason,
    })
}

/// Key length from decoy bounds. Without any vacuum or single-pair
/// contribution the fluctuation is unbounded and the key is empty.
pub fn key_length(
    c: f64,
    bounds: &DecoyBounds,
    n_t_mu1: f64,
    params: &ProtocolParams,
    budget: &SecurityBudget,
    model: LeakModel,
) -> Result<KeyLength, SecurityError> {
    let delta_fluct = if bounds.n_t01_lower > 0.0 {
        delta_fluctuation(params, bounds.n_t01_lower, budget.eps_s)?
    } else {
        f64::INFINITY
    };
    assemble_key_length(&KeyLengthInputs {
        c,
        n_t01_lower: bounds.n_t01_lower,
        n_t_mu1,
        d0: params.d0,
        delta_fluct,
        leak_ec_bits: leak_ec(params, n_t_mu1, budget.eps_hash, model),
        eps_s: budget.eps_s,
        eps_c: budget.eps_c,
        alphabet_bits: params.alphabet_bits(),
        d_min: d_min(params),
        d_w1_upper: bounds.d_w1_upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSummary {
    pub rate_bps: f64,
    /// Secret bits per μ₁ time-basis coincidence.
    pub pie: f64,
}

pub fn key_rate_report(ell: f64, n_t_mu1: f64, session: &SessionSpec) -> RateSummary {
    RateSummary {
        rate_bps: ell / session.running_time_s,
        pie: if n_t_mu1 > 0.0 { ell / n_t_mu1 } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub ell_bits: f64,
    pub rate_bps: f64,
    pub pie: f64,
    pub n_t_mu1: f64,
    pub n_t01_lower: f64,
    pub ell_raw_bits: f64,
    pub uncertainty_term: f64,
    pub gamma_term: f64,
    pub leak_ec_bits: f64,
    pub eps_term: f64,
    pub delta_fluct: f64,
    pub d0: f64,
    pub d_min: f64,
    pub d_w1_upper: f64,
    pub abort_reason: AbortReason,
}

impl KeyRateReport {
    pub fn new(k: &KeyLength, n_t_mu1: f64, n_t01_lower: f64, session: &SessionSpec) -> Self {
        let r = key_rate_report(k.ell_bits, n_t_mu1, session);
        KeyRateReport {
            ell_bits: k.ell_bits,
            rate_bps: r.rate_bps,
            pie: r.pie,
            n_t_mu1,
            n_t01_lower,
            ell_raw_bits: k.ell_raw_bits,
            uncertainty_term: k.uncertainty_term,
            gamma_term: k.gamma_term,
            leak_ec_bits: k.leak_ec_bits,
            eps_term: k.eps_term,
            delta_fluct: k.delta_fluct,
            d0: k.d0,
            d_min: k.d_min,
            d_w1_upper: k.d_w1_upper,
            abort_reason: k.abort_reason,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_config;
    use approx::assert_relative_eq;

    fn params() -> ProtocolParams {
        reference_config().protocol
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(0.0), 1.0);
        assert_relative_eq!(gamma(1.0), (1.0 + 2f64.sqrt()).powi(2), max_relative = 1e-14);
        assert_relative_eq!(gamma(2.0), 11.0902, max_relative = 1e-5);
        assert!(gamma(1e-300) >= 1.0 && gamma(1e-300) < 1.0 + 1e-12);
    }

    #[test]
    fn fluctuation_examples() {
        let p = params();
        assert_relative_eq!(delta_fluctuation(&p, 2e7, 5e-11).unwrap(), 3.7346, max_relative = 1e-4);
        assert!(delta_fluctuation(&p, 1e30, 5e-11).unwrap() < 1e-9);
        let mut p = params();
        p.p_alpha = 1e-3;
        assert!(matches!(
            delta_fluctuation(&p, 1e6, 1e-10),
            Err(SecurityError::InfeasiblePAlpha { .. })
        ));
    }

    #[test]
    fn leak_examples() {
        let p = params();
        assert_eq!(hash_bits(1e-10), 34.0);
        assert_eq!(leak_ec(&p, 0.0, 1e-10, LeakModel::Gaussian), 34.0);
        let l = leak_ec(&p, 1e6, 1e-10, LeakModel::Gaussian);
        assert_relative_eq!(l - 34.0, 2.9235e6, max_relative = 5e-4);
        let mut q = params();
        q.beta_e = 1.0;
        assert_eq!(leak_ec(&q, 1e6, 1e-10, LeakModel::Alphabet), 34.0);
        assert_relative_eq!(
            leak_ec(&p, 1e6, 1e-10, LeakModel::Alphabet),
            1e6 * 0.09 * 300f64.log2() + 34.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn d_min_examples() {
        let mut p = params();
        assert_relative_eq!(d_min(&p), 0.08644, epsilon = 1e-4);
        p.beta_d = 2e6;
        assert_relative_eq!(d_min(&p), 3.326, epsilon = 1e-3);
        p.beta_d = 1e-12;
        p.sigma_cor = 1e-12;
        assert!(d_min(&p) < 1e-12);
    }

    fn worked() -> KeyLengthInputs {
        KeyLengthInputs {
            c: 1.3881e-3,
            n_t01_lower: 1e6,
            n_t_mu1: 1e6,
            d0: 2.0,
            delta_fluct: 3.7346,
            leak_ec_bits: 3e6,
            eps_s: 5e-11,
            eps_c: 5e-11,
            alphabet_bits: 300f64.log2(),
            d_min: 0.08644,
            d_w1_upper: 0.5,
        }
    }

    #[test]
    fn worked_key_length() {
        let k = assemble_key_length(&worked()).unwrap();
        assert_relative_eq!(k.uncertainty_term, 9.4926e6, max_relative = 1e-4);
        assert_relative_eq!(k.gamma_term, 4.9660e6, max_relative = 1e-4);
        assert_relative_eq!(k.eps_term, -102.66, max_relative = 1e-4);
        assert_relative_eq!(k.ell_bits, 1.5267e6, max_relative = 1e-3);
        assert_eq!(k.abort_reason, AbortReason::None);
    }

    #[test]
    fn aborts() {
        let mut i = worked();
        i.leak_ec_bits = 1e7;
        let k = assemble_key_length(&i).unwrap();
        assert_eq!((k.ell_bits, k.abort_reason), (0.0, AbortReason::NonpositiveKey));
        let mut i = worked();
        i.d_w1_upper = 2.5;
        let k = assemble_key_length(&i).unwrap();
        assert_eq!((k.ell_bits, k.abort_reason), (0.0, AbortReason::DistanceExceeded));
        let mut i = worked();
        i.d_min = 2.0;
        i.d_w1_upper = 2.5;
        assert_eq!(
            assemble_key_length(&i).unwrap().abort_reason,
            AbortReason::ThresholdBelowDmin
        );
        let mut i = worked();
        i.c = 1.0;
        assert!(assemble_key_length(&i).is_err());
    }

    #[test]
    fn entropy_cap() {
        let mut i = worked();
        i.leak_ec_bits = 0.0;
        i.delta_fluct = 0.0;
        i.d0 = 1e-6;
        i.d_min = 0.0;
        i.d_w1_upper = 0.0;
        let k = assemble_key_length(&i).unwrap();
        assert!(k.ell_raw_bits > 1e6 * 300f64.log2());
        assert_eq!(k.ell_bits, 1e6 * 300f64.log2());
    }

    #[test]
    fn rate_examples() {
        let mut s = reference_config().session;
        s.running_time_s = 60.0;
        assert_relative_eq!(
            key_rate_report(1.5267e6, 1e6, &s).rate_bps,
            25445.0,
            max_relative = 1e-4
        );
        assert_eq!(key_rate_report(0.0, 1e6, &s).pie, 0.0);
        assert_relative_eq!(key_rate_report(3.3e6, 1e6, &s).pie, 3.3, max_relative = 1e-15);
        assert_eq!(key_rate_report(5.0, 0.0, &s).pie, 0.0);
    }
}
