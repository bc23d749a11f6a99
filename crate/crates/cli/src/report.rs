//! CSV and JSON rendering.

use serde::Serialize;

use crate::sweep::{BetaPoint, SweepRow};

/// Formats `x` with 9 significant digits: positional notation for
/// magnitudes in `[1e-4, 1e9)`, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub const SWEEP_HEADER: &str =
    "value,ell_bits,rate_bps,pie,n_T_mu1,n_T01_lower,delta_fluct,d_min,d_W1_upper,abort_reason";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let nums = [
            r.value,
            r.ell_bits,
            r.rate_bps,
            r.pie,
            r.n_t_mu1,
            r.n_t01_lower,
            r.delta_fluct,
            r.d_min,
            r.d_w1_upper,
        ];
        for v in nums {
            out.push_str(&fmt_sig9(v));
            out.push(',');
        }
        out.push_str(r.abort_reason.as_str());
        out.push('\n');
    }
    out
}

pub const BETA_HEADER: &str = "beta_D,log10_beta_D,effective_d0,ell_bits,rate_bps,abort_reason";

pub fn beta_csv(points: &[BetaPoint]) -> String {
    let mut out = String::from(BETA_HEADER);
    out.push('\n');
    for p in points {
        for v in [p.beta_d, p.log10_beta_d, p.effective_d0, p.ell_bits, p.rate_bps] {
            out.push_str(&fmt_sig9(v));
            out.push(',');
        }
        out.push_str(p.abort_reason.as_str());
        out.push('\n');
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
