//! Finite-key decoy-state estimation.
//!
//! Observed per-intensity counts are widened by a Hoeffding deviation, then
//! combined into lower bounds on the vacuum and single-pair contributions and
//! an upper bound on the single-pair conjugate-time spread.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelObservation;
use crate::config::{IntensityProfile, SecurityBudget};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoyError {
    #[error("tau_{0} vanishes; the conditional intensity distribution is undefined")]
    ZeroTau(u32),
    #[error("intensity profile is degenerate: {0}")]
    DegenerateProfile(&'static str),
    #[error("single-pair conjugate-basis lower bound is zero; estimation impossible")]
    EstimationImpossible,
    #[error("lower vacuum bound enlarged the single-pair bracket ({lower} > {upper})")]
    NonConservativeSubstitution { lower: f64, upper: f64 },
}

fn poisson_weight(mu: f64, n: u32) -> f64 {
    let mut w = (-mu).exp();
    for j in 1..=n {
        w *= mu / j as f64;
    }
    w
}

/// `τ_n = Σ_k p_k e^{-μ_k} μ_k^n / n!`, the probability that a pulse carries `n` pairs.
pub fn tau(n: u32, profile: &IntensityProfile) -> f64 {
    (0..3).map(|k| profile.p_mu[k] * poisson_weight(profile.mu[k], n)).sum()
}

/// Probability that a pulse carrying `n` pairs used intensity `k`.
pub fn conditional_intensity(k: usize, n: u32, profile: &IntensityProfile) -> Result<f64, DecoyError> {
    let t = tau(n, profile);
    if !(t > 0.0) {
        return Err(DecoyError::ZeroTau(n));
    }
    Ok(profile.p_mu[k] * poisson_weight(profile.mu[k], n) / t)
}

/// Hoeffding deviation `sqrt(n ln(1/ε) / 2)`.
pub fn zeta(n: f64, eps: f64) -> f64 {
    (n.max(0.0) * (1.0 / eps).ln() / 2.0).sqrt()
}

/// Per-intensity upper/lower bounds on the asymptotic counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisBounds {
    pub upper: [f64; 3],
    pub lower: [f64; 3],
}

impl BasisBounds {
    /// Widens each count by the deviation of the basis total.
    pub fn from_counts(counts: &[f64; 3], eps1: f64) -> Self {
        let z = zeta(counts.iter().sum(), eps1);
        BasisBounds {
            upper: counts.map(|n| n + z),
            lower: counts.map(|n| (n - z).max(0.0)),
        }
    }

    /// Bounds with no fluctuation, `n̄ = n̲ = n`.
    pub fn exact(counts: [f64; 3]) -> Self {
        BasisBounds {
            upper: counts,
            lower: counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityBounds {
    pub t: BasisBounds,
    pub w: BasisBounds,
}

pub fn intensity_bounds(obs: &ChannelObservation, eps1: f64) -> IntensityBounds {
    IntensityBounds {
        t: BasisBounds::from_counts(&obs.n_t_mu, eps1),
        w: BasisBounds::from_counts(&obs.n_w_mu, eps1),
    }
}

/// Lower bound on vacuum frames `s̲_0` and its share `n̲_0` attributed to μ₁.
pub fn vacuum_bound(b: &BasisBounds, profile: &IntensityProfile) -> Result<(f64, f64), DecoyError> {
    let [_, m2, m3] = profile.mu;
    let [_, p2, p3] = profile.p_mu;
    if !(m2 > m3) {
        return Err(DecoyError::DegenerateProfile("mu2 must exceed mu3"));
    }
    let t0 = tau(0, profile);
    let s0 = (t0 / (m2 - m3) * (m2 * m3.exp() * b.lower[2] / p3 - m3 * m2.exp() * b.upper[1] / p2)).max(0.0);
    Ok((s0, s0 * conditional_intensity(0, 0, profile)?))
}

/// Upper bound on vacuum frames from the weakest intensity alone:
/// `n_{μ₃} ≥ p(μ₃|0) s_0`.
pub fn vacuum_upper(b: &BasisBounds, profile: &IntensityProfile) -> f64 {
    let m3 = profile.mu[2];
    tau(0, profile) * m3.exp() * b.upper[2] / profile.p_mu[2]
}

fn single_bracket(b: &BasisBounds, profile: &IntensityProfile, s0: f64, t0: f64) -> f64 {
    let [m1, m2, m3] = profile.mu;
    let [p1, p2, p3] = profile.p_mu;
    m2.exp() * b.lower[1] / p2 - m3.exp() * b.upper[2] / p3
        + (m2 * m2 - m3 * m3) / (m1 * m1) * (s0 / t0 - m1.exp() * b.upper[0] / p1)
}

/// Lower bound on single-pair frames `s̲_1`, given the vacuum value `s0`
/// used inside the bracket. The vacuum term enters with a positive
/// coefficient, so inserting a lower bound must not enlarge the bracket
/// beyond its value at the vacuum upper bound; this is checked.
pub fn single_pair_lower(b: &BasisBounds, profile: &IntensityProfile, s0: f64) -> Result<f64, DecoyError> {
    let [m1, m2, m3] = profile.mu;
    let denom = m1 * (m2 - m3) - (m2 * m2 - m3 * m3);
    if !(denom > 0.0) {
        return Err(DecoyError::DegenerateProfile(
            "mu1 (mu2 - mu3) - (mu2^2 - mu3^2) must be positive",
        ));
    }
    let t0 = tau(0, profile);
    let t1 = tau(1, profile);
    let bracket = single_bracket(b, profile, s0, t0);
    let bracket_upper = single_bracket(b, profile, vacuum_upper(b, profile), t0);
    if bracket > bracket_upper {
        return Err(DecoyError::NonConservativeSubstitution {
            lower: bracket,
            upper: bracket_upper,
        });
    }
    Ok((m1 * t1 / denom * bracket).max(0.0))
}

/// `s̲_1` and the μ₁-attributed `n̲_1 = a - ζ(a, ε₂)` with `a = s̲_1 p(μ₁|1)`.
pub fn single_bound(b: &BasisBounds, profile: &IntensityProfile, s0: f64, eps2: f64) -> Result<(f64, f64), DecoyError> {
    let s1 = single_pair_lower(b, profile, s0)?;
    let a = s1 * conditional_intensity(0, 1, profile)?;
    Ok((s1, (a - zeta(a, eps2)).max(0.0)))
}

/// Upper bound on the single-pair conjugate-basis mean-squared difference.
///
/// The surrounding mixture identity is often phrased as a lower bound; the
/// rearranged quantity bounds `σ²_{W,1}` from above, which is what the
/// distance check needs.
pub fn sigma_single_upper(
    w: &BasisBounds,
    sigma2_w: &[f64; 3],
    s_w1_lower: f64,
    profile: &IntensityProfile,
) -> Result<f64, DecoyError> {
    let p2 = conditional_intensity(1, 1, profile)?;
    let p3 = conditional_intensity(2, 1, profile)?;
    if !(p2 > p3) {
        return Err(DecoyError::DegenerateProfile("p(mu2|1) must exceed p(mu3|1)"));
    }
    if !(s_w1_lower > 0.0) {
        return Err(DecoyError::EstimationImpossible);
    }
    let num = w.upper[1] * sigma2_w[1] - w.lower[2] * sigma2_w[2];
    Ok((num / (s_w1_lower * (p2 - p3))).max(0.0))
}

/// L₁ distance bound in bins, `sqrt(2σ²/π)/δ`.
pub fn l1_distance_upper(sigma2_w1_upper: f64, delta: f64) -> f64 {
    (2.0 / std::f64::consts::PI * sigma2_w1_upper).sqrt() / delta
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoyBounds {
    pub n_t_upper: [f64; 3],
    pub n_t_lower: [f64; 3],
    pub n_w_upper: [f64; 3],
    pub n_w_lower: [f64; 3],
    pub s_t0_lower: f64,
    pub s_t1_lower: f64,
    pub n_t0_lower: f64,
    pub n_t1_lower: f64,
    pub n_t01_lower: f64,
    pub s_w1_lower: f64,
    /// Infinite when `s_w1_lower` is zero.
    pub sigma2_w1_upper: f64,
    /// Bins; infinite when `s_w1_lower` is zero.
    pub d_w1_upper: f64,
}

/// Full estimation from one observation. A zero single-pair conjugate-basis
/// bound leaves the spread unbounded, which forces the distance check to fail.
pub fn estimate(
    obs: &ChannelObservation,
    profile: &IntensityProfile,
    budget: &SecurityBudget,
    delta: f64,
) -> Result<DecoyBounds, DecoyError> {
    let b = intensity_bounds(obs, budget.eps_1);
    let (s_t0, n_t0) = vacuum_bound(&b.t, profile)?;
    let (s_t1, n_t1) = single_bound(&b.t, profile, s_t0, budget.eps_2)?;
    let (s_w0, _) = vacuum_bound(&b.w, profile)?;
    let s_w1 = single_pair_lower(&b.w, profile, s_w0)?;
    let sigma2 = match sigma_single_upper(&b.w, &obs.sigma2_w_mu, s_w1, profile) {
        Ok(s) => s,
        Err(DecoyError::EstimationImpossible) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(DecoyBounds {
        n_t_upper: b.t.upper,
        n_t_lower: b.t.lower,
        n_w_upper: b.w.upper,
        n_w_lower: b.w.lower,
        s_t0_lower: s_t0,
        s_t1_lower: s_t1,
        n_t0_lower: n_t0,
        n_t1_lower: n_t1,
        n_t01_lower: n_t0 + n_t1,
        s_w1_lower: s_w1,
        sigma2_w1_upper: sigma2,
        d_w1_upper: l1_distance_upper(sigma2, delta),
    })
}
