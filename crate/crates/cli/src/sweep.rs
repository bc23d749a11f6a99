//! Parameter sweeps and the dispersion optimizer.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use hdqkd_core::security::{d_min, AbortReason};
use hdqkd_core::{evaluate, evaluate_sampled, Config, ConfigDocument, ConfigError, Evaluation, PipelineError};

/// Margin (bins) added to `d_min` when the configured threshold is too low.
pub const D0_MARGIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("every grid point aborted")]
    NoFeasiblePoint,
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    DistanceKm,
    RunningTimeS,
    Delta,
    BetaD,
    D0,
}

impl SweepVariable {
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::DistanceKm => "distance_km",
            SweepVariable::RunningTimeS => "running_time_s",
            SweepVariable::Delta => "delta",
            SweepVariable::BetaD => "beta_D",
            SweepVariable::D0 => "d0",
        }
    }

    pub fn parse(name: &str) -> Result<Self, SweepError> {
        [
            SweepVariable::DistanceKm,
            SweepVariable::RunningTimeS,
            SweepVariable::Delta,
            SweepVariable::BetaD,
            SweepVariable::D0,
        ]
        .into_iter()
        .find(|v| v.key() == name)
        .ok_or_else(|| SweepError::Spec(format!("cannot sweep `{name}`")))
    }
}

/// Evenly spaced values, linear or logarithmic, endpoints included.
pub fn grid(start: f64, stop: f64, count: usize, log: bool) -> Result<Vec<f64>, SweepError> {
    if count == 0 {
        return Err(SweepError::Spec("grid needs at least one point".into()));
    }
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(SweepError::Spec("log grid needs positive endpoints".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = if log {
        (start.log10(), stop.log10())
    } else {
        (start, stop)
    };
    let step = (b - a) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                start
            } else if i + 1 == count {
                stop
            } else if log {
                10f64.powf(a + step * i as f64)
            } else {
                a + step * i as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::Spec("no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::Spec("values must be finite".into()));
        }
        let up = values.windows(2).all(|w| w[1] > w[0]);
        let down = values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(SweepError::Spec("values must be strictly monotone".into()));
        }
        Ok(SweepSpec { variable, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub ell_bits: f64,
    pub rate_bps: f64,
    pub pie: f64,
    pub n_t_mu1: f64,
    pub n_t01_lower: f64,
    pub delta_fluct: f64,
    pub d_min: f64,
    pub d_w1_upper: f64,
    pub abort_reason: AbortReason,
}

impl SweepRow {
    pub fn from_evaluation(value: f64, e: &Evaluation) -> Self {
        let r = &e.report;
        SweepRow {
            value,
            ell_bits: r.ell_bits,
            rate_bps: r.rate_bps,
            pie: r.pie,
            n_t_mu1: r.n_t_mu1,
            n_t01_lower: r.n_t01_lower,
            delta_fluct: r.delta_fluct,
            d_min: r.d_min,
            d_w1_upper: r.d_w1_upper,
            abort_reason: r.abort_reason,
        }
    }
}

/// Evaluates a resolved configuration, sampled when a seed is given.
pub fn evaluate_config(config: &Config, seed: Option<u64>) -> Result<Evaluation, PipelineError> {
    match seed {
        Some(s) => evaluate_sampled(config, s),
        None => evaluate(config),
    }
}

fn with_value(doc: &ConfigDocument, key: &str, value: f64) -> Result<ConfigDocument, SweepError> {
    let mut d = doc.clone();
    d.set_f64(key, value)?;
    Ok(d)
}

/// Runs `f` over `items` on at most `parallel` threads, keeping input order.
fn par_map<T, R, F>(items: &[T], parallel: usize, f: F) -> Result<Vec<R>, SweepError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, SweepError> + Sync + Send,
{
    if parallel <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    pool.install(|| items.par_iter().map(f).collect())
}

/// One row per grid value, in grid order.
pub fn run_sweep(
    doc: &ConfigDocument,
    spec: &SweepSpec,
    seed: Option<u64>,
    parallel: usize,
) -> Result<Vec<SweepRow>, SweepError> {
    par_map(&spec.values, parallel, |&v| {
        let config = with_value(doc, spec.variable.key(), v)?.resolve()?;
        let e = evaluate_config(&config, seed)?;
        Ok(SweepRow::from_evaluation(v, &e))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaPoint {
    pub beta_d: f64,
    pub log10_beta_d: f64,
    /// Threshold used at this point, raised above `d_min` when needed.
    pub effective_d0: f64,
    pub ell_bits: f64,
    pub rate_bps: f64,
    pub abort_reason: AbortReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaOptimum {
    pub best_beta_d: f64,
    pub best_rate_bps: f64,
    pub curve: Vec<BetaPoint>,
}

/// Rate over a grid of dispersion values. At each point the threshold is
/// `max(d0, d_min + D0_MARGIN)`. Ties resolve to the smallest `beta_D`.
pub fn optimize_beta(
    doc: &ConfigDocument,
    betas: &[f64],
    seed: Option<u64>,
    parallel: usize,
) -> Result<BetaOptimum, SweepError> {
    if betas.is_empty() {
        return Err(SweepError::Spec("no beta_D values".into()));
    }
    if betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(SweepError::Spec("beta_D values must be positive".into()));
    }
    let curve = par_map(betas, parallel, |&b| {
        let d = with_value(doc, "beta_D", b)?;
        let base = d.resolve()?;
        let d0 = base.protocol.d0.max(d_min(&base.protocol) + D0_MARGIN);
        let config = with_value(&d, "d0", d0)?.resolve()?;
        let r = evaluate_config(&config, seed)?.report;
        Ok(BetaPoint {
            beta_d: b,
            log10_beta_d: b.log10(),
            effective_d0: d0,
            ell_bits: r.ell_bits,
            rate_bps: r.rate_bps,
            abort_reason: r.abort_reason,
        })
    })?;
    let best = curve
        .iter()
        .fold(None::<&BetaPoint>, |acc, p| match acc {
            Some(a) if a.rate_bps >= p.rate_bps => Some(a),
            _ => Some(p),
        })
        .unwrap();
    if !(best.rate_bps > 0.0) {
        return Err(SweepError::NoFeasiblePoint);
    }
    Ok(BetaOptimum {
        best_beta_d: best.beta_d,
        best_rate_bps: best.rate_bps,
        curve,
    })
}
