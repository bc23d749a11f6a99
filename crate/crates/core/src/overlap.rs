//! Overlap between the time and conjugate-time measurements.
//!
//! After completing the square, the chirped frequency integral reduces to the
//! Fresnel tail `F(v) = ∫_v^∞ e^{-iu²} du`. Its squared modulus peaks above
//! the full-line value `π`, so the non-dilated overlap exceeds the dilated
//! one by the constant `sup_v |F(v)|² / π`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::quad;

/// Lower limit beyond which the tail is evaluated asymptotically.
const ASYMPTOTIC_CUT: f64 = 6.0;
const MAX_PANELS: usize = 4000;
/// Coarse scan used to bracket the maximizing lower limit.
const SCAN_LO: f64 = -5.0;
const SCAN_HI: f64 = 0.0;
const SCAN_STEPS: usize = 100;
/// Tolerance of the cached constant used by the key-rate pipeline.
const CACHE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("relative tolerance {0} outside (1e-10, 1e-2)")]
    RelTolOutOfRange(f64),
    #[error("Fresnel tail at x = {x} cannot reach tolerance {tol}")]
    ToleranceUnreachable { x: f64, tol: f64 },
    #[error("coarse scan found no interior maximum")]
    BracketFailed,
    #[error("overlap c = {c} is not below 1; the uncertainty bound is vacuous")]
    Vacuous { c: f64 },
}

/// `∫_{-∞}^{∞} e^{-iu²} du = √π e^{-iπ/4}`.
pub fn full_line() -> Complex64 {
    Complex64::from_polar(PI.sqrt(), -FRAC_PI_4)
}

/// Tail `∫_c^∞ e^{-iu²} du` for `c ≥ ASYMPTOTIC_CUT` by repeated integration
/// by parts. Writing `T_k = ∫_c^∞ u^{-k} e^{-iu²} du`,
/// `T_k = e^{-ic²} c^{-k-1} / (2i) - (k+1)/(2i) T_{k+2}` and `|T_k| ≤ c^{-k-1}`,
/// so truncating after `M` terms leaves a remainder bounded by
/// `|a_M| c^{-2M-1}`.
fn asymptotic_tail(c: f64, tol: f64) -> Option<Complex64> {
    let half_i = Complex64::new(0.0, 0.5);
    let prefactor = Complex64::from_polar(1.0, -c * c) / Complex64::new(0.0, 2.0);
    let inv_c2 = 1.0 / (c * c);
    let mut a = Complex64::new(1.0, 0.0);
    let mut power = 1.0 / c;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut prev_bound = f64::INFINITY;
    for j in 0..200 {
        sum += a * power;
        a *= half_i * (2 * j + 1) as f64;
        power *= inv_c2;
        let bound = a.norm() * power;
        if bound <= tol {
            return Some(prefactor * sum);
        }
        if bound >= prev_bound {
            return None;
        }
        prev_bound = bound;
    }
    None
}

/// `∫_x^∞ e^{-iu²} du`, accurate to `abs_tol` in each component.
///
/// The head `[x, 6]` is integrated adaptively and the remainder uses the
/// asymptotic expansion. Lower limits below `-6` use `F(x) = √π e^{-iπ/4} - F(-x)`.
pub fn fresnel_tail(x: f64, abs_tol: f64) -> Result<Complex64, OverlapError> {
    if !(abs_tol > 0.0) {
        return Err(OverlapError::NonPositive("abs_tol"));
    }
    if !x.is_finite() {
        return Err(OverlapError::NonFinite("x"));
    }
    let unreachable = OverlapError::ToleranceUnreachable { x, tol: abs_tol };
    if x >= ASYMPTOTIC_CUT {
        return asymptotic_tail(x, abs_tol).ok_or(unreachable);
    }
    if x <= -ASYMPTOTIC_CUT {
        return asymptotic_tail(-x, abs_tol).map(|t| full_line() - t).ok_or(unreachable);
    }
    let head = quad::integrate(
        |u| Complex64::from_polar(1.0, -u * u),
        x,
        ASYMPTOTIC_CUT,
        0.5 * abs_tol,
        MAX_PANELS,
    )
    .ok_or(unreachable.clone())?;
    let tail = asymptotic_tail(ASYMPTOTIC_CUT, 0.5 * abs_tol).ok_or(unreachable)?;
    Ok(head.value + tail)
}

/// Maximum of `|F(v)|² / π` and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overshoot {
    pub value: f64,
    pub argmax_v: f64,
    pub rel_tol: f64,
}

fn tail_power(v: f64, tol: f64) -> Result<f64, OverlapError> {
    Ok(fresnel_tail(v, tol)?.norm_sqr())
}

/// Locates `sup_v |F(v)|²` by a coarse scan over `[-5, 0]` followed by
/// golden-section refinement of the bracketing cell.
pub fn overshoot_search(rel_tol: f64) -> Result<Overshoot, OverlapError> {
    if !(rel_tol > 1e-10 && rel_tol < 1e-2) {
        return Err(OverlapError::RelTolOutOfRange(rel_tol));
    }
    let ftol = 1e-2 * rel_tol;
    let step = (SCAN_HI - SCAN_LO) / SCAN_STEPS as f64;
    let grid: Vec<f64> = (0..=SCAN_STEPS).map(|i| SCAN_LO + step * i as f64).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in grid.iter().enumerate() {
        let g = tail_power(v, ftol)?;
        if g > best.1 {
            best = (i, g);
        }
    }
    let i = best.0;
    if i == 0 || i == SCAN_STEPS {
        return Err(OverlapError::BracketFailed);
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut g1 = tail_power(x1, ftol)?;
    let mut g2 = tail_power(x2, ftol)?;
    let x_tol = 1e-3 * rel_tol.sqrt();
    while b - a > x_tol {
        if g1 > g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - inv_phi * (b - a);
            g1 = tail_power(x1, ftol)?;
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + inv_phi * (b - a);
            g2 = tail_power(x2, ftol)?;
        }
    }
    let (argmax_v, g) = if g1 > g2 { (x1, g1) } else { (x2, g2) };
    Ok(Overshoot {
        value: g / PI,
        argmax_v,
        rel_tol,
    })
}

/// Ratio of the non-dilated to the dilated continuous overlap.
pub fn overshoot_constant(rel_tol: f64) -> Result<f64, OverlapError> {
    overshoot_search(rel_tol).map(|o| o.value)
}

/// Overshoot at the pipeline tolerance, computed once per process.
pub fn cached_overshoot() -> Result<Overshoot, OverlapError> {
    static CACHE: OnceLock<Result<Overshoot, OverlapError>> = OnceLock::new();
    CACHE.get_or_init(|| overshoot_search(CACHE_REL_TOL)).clone()
}

/// Continuous overlap `c̄_∞` in ps⁻².
///
/// Normalized so that the full-line chirp integral gives the dilated value
/// `1/(2π²β_D)`; the half-line supremum multiplies this by the overshoot.
/// The supremum over the shift absorbs any finite lower frequency limit, so
/// `omega_min` only has to be finite.
pub fn cbar_infinity(beta_d: f64, omega_min: f64) -> Result<f64, OverlapError> {
    if !(beta_d > 0.0) {
        return Err(OverlapError::NonPositive("beta_D"));
    }
    if !omega_min.is_finite() {
        return Err(OverlapError::NonFinite("omega_min"));
    }
    Ok(cached_overshoot()?.value / (2.0 * PI * PI * beta_d))
}

/// Overlap of the binned measurements, `c̄_∞ δ²`. Fails when it is not below 1.
pub fn overlap_discrete(delta: f64, beta_d: f64) -> Result<f64, OverlapError> {
    if !(delta > 0.0) {
        return Err(OverlapError::NonPositive("delta"));
    }
    let c = cbar_infinity(beta_d, 0.0)? * delta * delta;
    if c >= 1.0 {
        return Err(OverlapError::Vacuous { c });
    }
    Ok(c)
}

/// Dilated overlap `δ²/(2π²β_D)`.
pub fn overlap_dilated(delta: f64, beta_d: f64) -> Result<f64, OverlapError> {
    if !(delta > 0.0) {
        return Err(OverlapError::NonPositive("delta"));
    }
    if !(beta_d > 0.0) {
        return Err(OverlapError::NonPositive("beta_D"));
    }
    Ok(delta * delta / (2.0 * PI * PI * beta_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapResult {
    /// Continuous overlap (ps⁻²).
    pub c_bar_inf: f64,
    pub c_discrete: f64,
    pub c_dilated: f64,
    pub overshoot: f64,
    pub argmax_v: f64,
    /// Set when `c_discrete ≥ 1`.
    pub vacuous_bound: bool,
}

/// All overlap quantities at `(delta, beta_d)`. A vacuous bound is flagged
/// rather than reported as an error.
pub fn overlap_result(delta: f64, beta_d: f64) -> Result<OverlapResult, OverlapError> {
    let c_dilated = overlap_dilated(delta, beta_d)?;
    let o = cached_overshoot()?;
    let c_bar_inf = cbar_infinity(beta_d, 0.0)?;
    let c_discrete = c_bar_inf * delta * delta;
    Ok(OverlapResult {
        c_bar_inf,
        c_discrete,
        c_dilated,
        overshoot: o.value,
        argmax_v: o.argmax_v,
        vacuous_bound: c_discrete >= 1.0,
    })
}
