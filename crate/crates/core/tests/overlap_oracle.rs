//! Overlap checks against an independent Fresnel evaluation.
//!
//! Oracle: for x ≥ 0 rotate the contour, u = x + s e^{-iπ/4}, giving
//! F(x) = e^{-iπ/4} e^{-ix²} ∫_0^∞ e^{-s²} e^{-√2 x s (1+i)} ds, a smooth
//! decaying integrand handled by composite Simpson. For x < 0 add a Simpson
//! evaluation of ∫_x^0 e^{-iu²} du to F(0).

use std::f64::consts::{FRAC_PI_4, PI};

use hdqkd_core::overlap::{
    cbar_infinity, fresnel_tail, full_line, overlap_dilated, overlap_discrete, overshoot_search,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += f(a + h * i as f64) * w;
    }
    s * (h / 3.0)
}

fn oracle(x: f64) -> Complex64 {
    if x >= 0.0 {
        let r = std::f64::consts::SQRT_2 * x;
        let integral = simpson(|s| Complex64::new(-s * s - r * s, -r * s).exp(), 0.0, 9.0, 40_000);
        Complex64::from_polar(1.0, -FRAC_PI_4 - x * x) * integral
    } else {
        let n = ((-x) * 8000.0).ceil() as usize;
        oracle(0.0) + simpson(|u| Complex64::from_polar(1.0, -u * u), x, 0.0, n.max(100))
    }
}

#[test]
fn oracle_sanity() {
    assert!((oracle(0.0) - full_line() / 2.0).norm() < 1e-12);
}

#[test]
fn tail_matches_oracle_on_grid() {
    for i in 0..=26 {
        let x = -5.0 + 0.5 * i as f64;
        let f = fresnel_tail(x, 1e-11).unwrap();
        let o = oracle(x);
        assert!(
            (f.re - o.re).abs() < 1e-9 && (f.im - o.im).abs() < 1e-9,
            "x = {x}: {f} vs {o}"
        );
    }
}

#[test]
fn tail_at_fifty_is_small() {
    let f = fresnel_tail(50.0, 1e-10).unwrap();
    assert!(f.norm() < 0.02);
    assert!((f - oracle(50.0)).norm() < 1e-9);
}

#[test]
fn maximized_power_exceeds_full_line() {
    let o = overshoot_search(1e-6).unwrap();
    let peak = fresnel_tail(o.argmax_v, 1e-12).unwrap().norm_sqr();
    assert!(peak > PI);
    assert!((oracle(o.argmax_v).norm_sqr() - peak).abs() < 1e-8);
}

/// Independent maximization of the chirped integral over the shift τ for a
/// given lower frequency limit, using the oracle and a ternary search.
fn chirp_sup(beta: f64, omega_min: f64) -> f64 {
    // v(τ) = (√β/2)(ω_min − 2τ/β); cover v ∈ [−3, 0].
    let tau_of = |v: f64| beta / 2.0 * (omega_min - 2.0 * v / beta.sqrt());
    let power = |tau: f64| {
        let v = beta.sqrt() / 2.0 * (omega_min - 2.0 * tau / beta);
        oracle(v).norm_sqr() / (PI * PI * beta)
    };
    let (mut a, mut b) = (tau_of(0.0), tau_of(-3.0));
    for _ in 0..80 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if power(m1) < power(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    power(0.5 * (a + b))
}

#[test]
fn lower_frequency_limit_is_irrelevant() {
    let beta = 2e4;
    let s0 = chirp_sup(beta, 0.0);
    let s10 = chirp_sup(beta, 10.0);
    assert!((s0 - s10).abs() <= 1e-4 * s0);
    // Library normalization: the direct sup divided by 2π.
    let c = cbar_infinity(beta, 10.0).unwrap();
    assert!((c - s10 / (2.0 * PI)).abs() <= 1e-4 * c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn reflection_identity(x in -5.0f64..5.0) {
        let sum = fresnel_tail(x, 1e-10).unwrap() + fresnel_tail(-x, 1e-10).unwrap();
        prop_assert!((sum - full_line()).norm() < 1e-6);
    }

    #[test]
    fn cbar_scaling(beta in 1e2f64..1e8, k in 1e-3f64..1e3) {
        let a = cbar_infinity(k * beta, 0.0).unwrap();
        let b = cbar_infinity(beta, 0.0).unwrap() / k;
        prop_assert!((a - b).abs() <= 1e-6 * b);
    }

    #[test]
    fn discrete_over_dilated_is_overshoot(delta in 1.0f64..50.0, beta in 1e4f64..1e8) {
        let k = overshoot_search(1e-6).unwrap().value;
        let r = overlap_discrete(delta, beta).unwrap() / overlap_dilated(delta, beta).unwrap();
        prop_assert!((r - k).abs() <= 1e-6 * k);
        prop_assert!(r > 1.0);
    }
}
