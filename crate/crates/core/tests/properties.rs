use hdqkd_core::channel::{
    coincidence_probability, frame_statistics, mixed_sigma2, pair_yield, sample_session, sigma_w_expected,
    transmittance, ChannelObservation,
};
use hdqkd_core::config::{
    beta_from_dispersion, reference_config, IntensityProfile, MultiPairTiming, SecurityBudget, REFERENCE_CONFIG,
};
use hdqkd_core::decoy::{estimate, single_pair_lower, tau, vacuum_bound, BasisBounds};
use hdqkd_core::overlap::overlap_discrete;
use hdqkd_core::security::{assemble_key_length, gamma, KeyLengthInputs};
use hdqkd_core::{evaluate, evaluate_sampled, load_config, AbortReason, ConfigDocument, ConfigError};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Frozen 20-digit evaluations of (x + √(1+x²)) (x/(√(1+x²) − 1))^x.
#[allow(clippy::excessive_precision)]
const GAMMA_TABLE: [(f64, f64); 6] = [
    (0.0, 1.0),
    (0.5, 3.3301906767855612146),
    (1.0, 5.8284271247461900976),
    (2.0, 11.090169943749474241),
    (5.7346, 31.255085042202426688),
    (20.0, 108.75391511474298441),
];

#[test]
fn gamma_matches_high_precision_values() {
    for (x, want) in GAMMA_TABLE {
        assert!(rel(gamma(x), want) < 1e-12, "gamma({x}) = {}", gamma(x));
    }
}

#[test]
fn gamma_increases_from_one() {
    let mut prev = gamma(0.0);
    assert_eq!(prev, 1.0);
    for i in 1..=2000 {
        let g = gamma(i as f64 * 0.01);
        assert!(g > prev && g > 1.0);
        prev = g;
    }
}

#[test]
fn config_resolution_is_pure() {
    assert_eq!(
        load_config(REFERENCE_CONFIG).unwrap(),
        load_config(REFERENCE_CONFIG).unwrap()
    );
}

#[test]
fn each_single_violation_is_rejected() {
    let cases = [
        ("eta_d", "1.5"),
        ("Y0", "-1"),
        ("q", "1.0"),
        ("delta", "0"),
        ("T_f", "10"),
        ("beta_D", "0"),
        ("sigma_coh", "-3"),
        ("mu", "[0.05, 0.12, 0.005]"),
        ("mu", "[0.12, 0.1, 0.05]"),
        ("p_mu", "[0.5, 0.3, 0.3]"),
        ("eps_total", "2"),
        ("running_time_s", "0"),
        ("distance_km", "-1"),
    ];
    for (key, value) in cases {
        let mut d = ConfigDocument::parse(REFERENCE_CONFIG).unwrap();
        d.apply_override(&format!("{key}={value}")).unwrap();
        assert!(
            matches!(d.resolve(), Err(ConfigError::Invalid(_))),
            "{key}={value} accepted"
        );
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut d = ConfigDocument::parse(REFERENCE_CONFIG).unwrap();
    assert!(matches!(d.apply_override("gvd=3"), Err(ConfigError::UnknownKey(_))));
    let text = format!("{REFERENCE_CONFIG}\n[extra]\nx = 1\n");
    assert!(load_config(&text).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispersion_conversion_is_linear(d in 1e-2f64..1e7, k in 1e-2f64..1e2) {
        let a = beta_from_dispersion(k * d).unwrap();
        let b = k * beta_from_dispersion(d).unwrap();
        prop_assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn gamma_is_monotone(x in 0.0f64..20.0, dx in 1e-6f64..1.0) {
        prop_assert!(gamma(x + dx) > gamma(x));
        prop_assert!(gamma(x) >= 1.0);
    }

    #[test]
    fn counts_fall_with_distance(a in 0.0f64..200.0, b in 0.0f64..200.0) {
        let c = reference_config();
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let obs = |d: f64| {
            let mut s = c.session.clone();
            s.distance_km = d;
            frame_statistics(&c.protocol, &c.intensities, &s, &c.model)
        };
        let (x, y) = (obs(near), obs(far));
        for k in 0..3 {
            prop_assert!(y.n_t_mu[k] <= x.n_t_mu[k]);
            prop_assert!(y.n_w_mu[k] <= x.n_w_mu[k]);
        }
    }

    #[test]
    fn mixed_spread_lies_between_components(single in 0.0f64..1e6, extra in 0.0f64..1e6) {
        let p = reference_config().protocol;
        let t = sigma_w_expected(&p);
        let total = single + extra;
        for model in [MultiPairTiming::Uniform, MultiPairTiming::Correlated] {
            let s = mixed_sigma2(single, total, &t, model);
            let multi = mixed_sigma2(0.0, total.max(1.0), &t, model);
            let (lo, hi) = if multi < t.sigma_w_single { (multi, t.sigma_w_single) } else { (t.sigma_w_single, multi) };
            prop_assert!(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tighter_eps1_widens_bounds(e in 1e-20f64..1e-3) {
        let counts = [1e6, 3e5, 2e4];
        let loose = BasisBounds::from_counts(&counts, e);
        let tight = BasisBounds::from_counts(&counts, e / 10.0);
        for k in 0..3 {
            prop_assert!(tight.upper[k] >= loose.upper[k]);
            prop_assert!(tight.lower[k] <= loose.lower[k]);
        }
    }

    #[test]
    fn beta_chain_moves_key_by_log_k(kk in prop::sample::select(vec![2.0f64, 10.0, 100.0]), n in 1e4f64..1e9) {
        let inputs = |beta: f64| KeyLengthInputs {
            c: overlap_discrete(20.0, beta).unwrap(),
            n_t01_lower: n,
            n_t_mu1: n,
            d0: 2.0,
            delta_fluct: 0.5,
            leak_ec_bits: 0.3 * n,
            eps_s: 5e-11,
            eps_c: 5e-11,
            alphabet_bits: 1e3,
            d_min: 0.1,
            d_w1_upper: 1.0,
        };
        let a = assemble_key_length(&inputs(2e4)).unwrap();
        let b = assemble_key_length(&inputs(kk * 2e4)).unwrap();
        let expected = n * kk.log2();
        prop_assert!(rel(b.ell_raw_bits - a.ell_raw_bits, expected) < 1e-9);
    }

    #[test]
    fn key_never_exceeds_raw_entropy(n in 1.0f64..1e9, frac in 0.0f64..1.0, c in 1e-8f64..0.5, h in 1.0f64..12.0) {
        let k = assemble_key_length(&KeyLengthInputs {
            c,
            n_t01_lower: frac * n,
            n_t_mu1: n,
            d0: 2.0,
            delta_fluct: 0.1,
            leak_ec_bits: 34.0,
            eps_s: 5e-11,
            eps_c: 5e-11,
            alphabet_bits: h,
            d_min: 0.1,
            d_w1_upper: 1.0,
        }).unwrap();
        prop_assert!(k.ell_bits <= n * h);
        prop_assert!(k.ell_bits >= 0.0);
    }

    #[test]
    fn key_falls_with_threshold(d0 in 1.0f64..10.0, dd in 0.0f64..5.0) {
        let at = |d0: f64| assemble_key_length(&KeyLengthInputs {
            c: 1.3881e-3,
            n_t01_lower: 1e6,
            n_t_mu1: 1e6,
            d0,
            delta_fluct: 0.2,
            leak_ec_bits: 1e5,
            eps_s: 5e-11,
            eps_c: 5e-11,
            alphabet_bits: 8.2288,
            d_min: 0.1,
            d_w1_upper: 0.5,
        }).unwrap().ell_bits;
        prop_assert!(at(d0 + dd) <= at(d0));
    }
}

/// Expected counts from an explicit sum over pair numbers.
fn pair_sum(mu: f64, ea: f64, eb: f64, y: f64, n_max: u32) -> f64 {
    let mut w = (-mu).exp();
    let mut s = 0.0;
    for n in 0..=n_max {
        s += w * pair_yield(n, ea, eb, y);
        w *= mu / (n + 1) as f64;
    }
    s
}

#[test]
fn coincidence_probability_is_a_poisson_mixture() {
    let p = reference_config().protocol;
    let y = p.y0 * p.frame() * 1e-12;
    for mu in [0.001, 0.05, 0.12, 0.5, 2.0] {
        for d in [0.0, 50.0, 150.0] {
            let eb = transmittance(d, &p);
            let a = coincidence_probability(mu, p.eta_d, eb, y);
            let b = pair_sum(mu, p.eta_d, eb, y, 60);
            assert!(rel(a, b) < 1e-10, "mu {mu} d {d}: {a} vs {b}");
        }
    }
}

#[test]
fn exact_decoy_bounds_bracket_expected_contributions() {
    let p = reference_config().protocol;
    let y = p.y0 * p.frame() * 1e-12;
    let pulses = 1e10;
    for mu1 in [0.06, 0.1, 0.15, 0.25, 0.4] {
        let profile = IntensityProfile {
            mu: [mu1, 0.04, 0.004],
            p_mu: [0.6, 0.2, 0.2],
        };
        for d in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let eb = transmittance(d, &p);
            let counts = [0, 1, 2].map(|k| pulses * profile.p_mu[k] * pair_sum(profile.mu[k], p.eta_d, eb, y, 60));
            let s0 = pulses * tau(0, &profile) * pair_yield(0, p.eta_d, eb, y);
            let s1 = pulses * tau(1, &profile) * pair_yield(1, p.eta_d, eb, y);
            let b = BasisBounds::exact(counts);
            let (s0_lower, _) = vacuum_bound(&b, &profile).unwrap();
            let s1_lower = single_pair_lower(&b, &profile, s0_lower).unwrap();
            assert!(s0_lower <= s0 * (1.0 + 1e-9), "mu1 {mu1} d {d}: s0 {s0_lower} > {s0}");
            assert!(s1_lower <= s1 * (1.0 + 1e-9), "mu1 {mu1} d {d}: s1 {s1_lower} > {s1}");
            assert!(s1_lower > 0.5 * s1, "mu1 {mu1} d {d}: s1 bound too loose");
        }
    }
}

#[test]
fn estimate_from_zero_conjugate_counts_forces_abort() {
    let c = reference_config();
    let obs = ChannelObservation::new([1e6, 1e5, 1e3], [0.0; 3], [1e4; 3]);
    let b = estimate(&obs, &c.intensities, &c.security, c.protocol.delta).unwrap();
    assert!(b.d_w1_upper.is_infinite());
    let e = hdqkd_core::evaluate_observation(&c, obs).unwrap();
    assert_eq!(e.report.abort_reason, AbortReason::DistanceExceeded);
    assert_eq!(e.report.ell_bits, 0.0);
}

#[test]
fn budget_split_sums_to_total() {
    let b = SecurityBudget::from_total(1e-10);
    assert!(rel(b.eps_c + b.eps_s, 1e-10) < 1e-15);
    assert!(b.eps_1 + b.eps_2 + b.eps_smooth + b.eps_s / 4.0 <= b.eps_s);
}

#[test]
fn pipeline_is_deterministic() {
    let c = reference_config();
    assert_eq!(evaluate(&c).unwrap(), evaluate(&c).unwrap());
    let mut short = c.clone();
    short.session.block_size = 1e7;
    assert_eq!(
        evaluate_sampled(&short, 7).unwrap(),
        evaluate_sampled(&short, 7).unwrap()
    );
    let a = sample_session(&c.protocol, &c.intensities, &short.session, &c.model, 1);
    let b = sample_session(&c.protocol, &c.intensities, &short.session, &c.model, 2);
    assert_ne!(a, b);
}

#[test]
fn single_pair_bound_is_tight_for_large_blocks() {
    let mut c = reference_config();
    c.session.block_size = 1e10;
    let p = &c.protocol;
    let obs = frame_statistics(p, &c.intensities, &c.session, &c.model);
    let b = estimate(&obs, &c.intensities, &c.security, p.delta).unwrap();
    let eta_b = transmittance(0.0, p);
    let y = p.y0 * p.frame() * 1e-12;
    let s_t1 = c.session.block_size * p.q * p.q * tau(1, &c.intensities) * pair_yield(1, p.eta_d, eta_b, y);
    let share = hdqkd_core::decoy::conditional_intensity(0, 1, &c.intensities).unwrap();
    let ratio = b.n_t1_lower / (s_t1 * share);
    assert!(ratio <= 1.0 && ratio > 0.99, "ratio {ratio}");
}
