//! Protocol parameters, security budgets and configuration loading.
//!
//! Units are fixed and carried by the key names only: times in ps,
//! dispersion in ps², rates in Hz, loss in dB/km, distance in km and
//! session duration in s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack used when checking that `T_f/delta` is an integer.
const ALPHABET_INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn default_d0() -> f64 {
    2.0
}

/// Physical and protocol constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count rate (Hz).
    #[serde(rename = "Y0")]
    pub y0: f64,
    /// Detector timing jitter (ps).
    pub sigma_jit: f64,
    /// Fiber loss (dB/km).
    pub alpha: f64,
    /// Group-velocity-dispersion magnitude (ps²).
    #[serde(rename = "beta_D")]
    pub beta_d: f64,
    /// Pump repetition rate (Hz).
    #[serde(rename = "R_rep")]
    pub r_rep: f64,
    /// Biphoton correlation time (ps).
    pub sigma_cor: f64,
    /// Pump coherence time (ps).
    pub sigma_coh: f64,
    /// Frame duration (ps). Defaults to `sigma_coh`.
    #[serde(rename = "T_f", default)]
    pub t_f: Option<f64>,
    /// Time-bin duration (ps).
    pub delta: f64,
    /// Reconciliation efficiency.
    pub beta_e: f64,
    /// Probability of choosing the time basis.
    pub q: f64,
    /// Threshold code distance (bins).
    #[serde(default = "default_d0")]
    pub d0: f64,
    /// Cross-frame detection probability.
    #[serde(default)]
    pub p_alpha: f64,
}

impl ProtocolParams {
    /// Frame duration with the `sigma_coh` default applied.
    pub fn frame(&self) -> f64 {
        self.t_f.unwrap_or(self.sigma_coh)
    }

    /// Number of time bins per frame, `T_f/delta`.
    pub fn alphabet_size(&self) -> f64 {
        self.frame() / self.delta
    }

    /// Raw bits carried by one basis-matched coincidence, `log2(T_f/delta)`.
    pub fn alphabet_bits(&self) -> f64 {
        self.alphabet_size().log2()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [
            ("eta_d", self.eta_d),
            ("Y0", self.y0),
            ("sigma_jit", self.sigma_jit),
            ("alpha", self.alpha),
            ("beta_D", self.beta_d),
            ("R_rep", self.r_rep),
            ("sigma_cor", self.sigma_cor),
            ("sigma_coh", self.sigma_coh),
            ("T_f", self.frame()),
            ("delta", self.delta),
            ("beta_e", self.beta_e),
            ("q", self.q),
            ("d0", self.d0),
            ("p_alpha", self.p_alpha),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(invalid("eta_d must lie in (0,1]"));
        }
        if self.y0 < 0.0 {
            return Err(invalid("Y0 must be non-negative"));
        }
        if self.alpha < 0.0 {
            return Err(invalid("alpha must be non-negative"));
        }
        if self.beta_d <= 0.0 {
            return Err(invalid("beta_D must be positive"));
        }
        if self.r_rep <= 0.0 {
            return Err(invalid("R_rep must be positive"));
        }
        for (name, v) in [
            ("sigma_cor", self.sigma_cor),
            ("sigma_jit", self.sigma_jit),
            ("sigma_coh", self.sigma_coh),
            ("T_f", self.frame()),
            ("delta", self.delta),
        ] {
            if v <= 0.0 {
                return Err(invalid(format!("{name} must be strictly positive")));
            }
        }
        if self.sigma_cor >= self.sigma_jit {
            return Err(invalid("sigma_cor must be smaller than sigma_jit"));
        }
        if self.sigma_jit > self.delta {
            return Err(invalid("sigma_jit must not exceed delta"));
        }
        if self.delta >= self.frame() {
            return Err(invalid("delta must be smaller than T_f"));
        }
        let m = self.alphabet_size();
        if (m - m.round()).abs() > ALPHABET_INTEGER_TOL * m || m.round() < 2.0 {
            return Err(invalid("T_f/delta must be an integer of at least 2"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("q must lie strictly inside (0,1)"));
        }
        if !(self.beta_e > 0.0 && self.beta_e <= 1.0) {
            return Err(invalid("beta_e must lie in (0,1]"));
        }
        if self.d0 <= 0.0 {
            return Err(invalid("d0 must be positive"));
        }
        if !(self.p_alpha >= 0.0 && self.p_alpha < 1.0) {
            return Err(invalid("p_alpha must lie in [0,1)"));
        }
        Ok(())
    }
}

/// Decoy intensities (mean pairs per pulse) and their selection probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityProfile {
    pub mu: [f64; 3],
    pub p_mu: [f64; 3],
}

impl IntensityProfile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let [m1, m2, m3] = self.mu;
        if self.mu.iter().chain(self.p_mu.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("mu and p_mu entries must be finite"));
        }
        if !(m1 > m2 && m2 > m3 && m3 >= 0.0) {
            return Err(invalid("mu must satisfy mu1 > mu2 > mu3 >= 0"));
        }
        if m2 + m3 >= m1 {
            return Err(invalid("mu must satisfy mu2 + mu3 < mu1"));
        }
        if self.p_mu.iter().any(|&p| p <= 0.0) {
            return Err(invalid("p_mu entries must be strictly positive"));
        }
        if (self.p_mu.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("p_mu must sum to 1 within 1e-12"));
        }
        Ok(())
    }
}

/// Failure probabilities. Unset entries are derived from `eps_total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub eps_total: f64,
    /// Correctness.
    pub eps_c: f64,
    /// Secrecy.
    pub eps_s: f64,
    /// Entropy smoothing.
    pub eps_smooth: f64,
    /// Intensity-count deviations.
    pub eps_1: f64,
    /// Single-pair attribution deviation.
    pub eps_2: f64,
    /// Hash verification.
    pub eps_hash: f64,
}

impl SecurityBudget {
    /// Split of a total budget: half to correctness (spent on the hash check),
    /// half to secrecy, with an eighth of the secrecy share for each of the
    /// smoothing and the two estimation deviations.
    pub fn from_total(eps_total: f64) -> Self {
        let eps_s = eps_total / 2.0;
        SecurityBudget {
            eps_total,
            eps_c: eps_total / 2.0,
            eps_s,
            eps_smooth: eps_s / 8.0,
            eps_1: eps_s / 8.0,
            eps_2: eps_s / 8.0,
            eps_hash: eps_total / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("eps_total", self.eps_total),
            ("eps_c", self.eps_c),
            ("eps_s", self.eps_s),
            ("eps_smooth", self.eps_smooth),
            ("eps_1", self.eps_1),
            ("eps_2", self.eps_2),
            ("eps_hash", self.eps_hash),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{name} must lie strictly inside (0,1)")));
            }
        }
        if self.eps_c + self.eps_s > self.eps_total * (1.0 + 1e-12) {
            return Err(invalid("eps_c + eps_s must not exceed eps_total"));
        }
        if self.eps_hash > self.eps_c {
            return Err(invalid("eps_hash must not exceed eps_c"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecuritySection {
    eps_total: Option<f64>,
    eps_c: Option<f64>,
    eps_s: Option<f64>,
    eps_smooth: Option<f64>,
    eps_1: Option<f64>,
    eps_2: Option<f64>,
    eps_hash: Option<f64>,
}

impl SecuritySection {
    fn resolve(&self) -> SecurityBudget {
        let base = SecurityBudget::from_total(self.eps_total.unwrap_or(1e-10));
        let eps_s = self.eps_s.unwrap_or(base.eps_s);
        let eps_c = self.eps_c.unwrap_or(base.eps_c);
        SecurityBudget {
            eps_total: base.eps_total,
            eps_c,
            eps_s,
            eps_smooth: self.eps_smooth.unwrap_or(eps_s / 8.0),
            eps_1: self.eps_1.unwrap_or(eps_s / 8.0),
            eps_2: self.eps_2.unwrap_or(eps_s / 8.0),
            eps_hash: self.eps_hash.unwrap_or(eps_c),
        }
    }
}

/// One key-generation session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    /// Fiber length (km).
    pub distance_km: f64,
    /// Session duration (s).
    pub running_time_s: f64,
    /// Total pump pulses N.
    pub block_size: f64,
}

impl SessionSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(invalid("distance_km must be non-negative"));
        }
        if !(self.running_time_s.is_finite() && self.running_time_s > 0.0) {
            return Err(invalid("running_time_s must be positive"));
        }
        if !(self.block_size.is_finite() && self.block_size >= 1.0) {
            return Err(invalid("block_size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionSection {
    #[serde(default)]
    distance_km: f64,
    running_time_s: f64,
    block_size: Option<f64>,
}

/// Timing spread carried by multi-pair and accidental conjugate-basis
/// coincidences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiPairTiming {
    /// Uniform over the frame, variance `T_f²/6`.
    #[default]
    Uniform,
    /// Same spread as a single pair; only dark clicks are uncorrelated.
    Correlated,
}

/// Per-coincidence information assumed available to reconciliation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakModel {
    /// Gaussian timing channel capacity, capped at the alphabet entropy.
    #[default]
    Gaussian,
    /// Full alphabet entropy; leakage is `(1 - beta_e)` of the raw bits.
    Alphabet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub multi_pair_timing: MultiPairTiming,
    pub leak_model: LeakModel,
}

/// Validated parameter bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub protocol: ProtocolParams,
    pub intensities: IntensityProfile,
    pub security: SecurityBudget,
    pub session: SessionSpec,
    pub model: ModelOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    protocol: ProtocolParams,
    intensities: IntensityProfile,
    #[serde(default)]
    security: SecuritySection,
    session: SessionSection,
    #[serde(default)]
    model: ModelOptions,
}

impl RawConfig {
    fn resolve(self) -> Result<Config, ConfigError> {
        let protocol = self.protocol;
        protocol.validate()?;
        self.intensities.validate()?;
        let security = self.security.resolve();
        security.validate()?;
        let s = self.session;
        let session = SessionSpec {
            distance_km: s.distance_km,
            running_time_s: s.running_time_s,
            block_size: s.block_size.unwrap_or((protocol.r_rep * s.running_time_s).round()),
        };
        session.validate()?;
        Ok(Config {
            protocol,
            intensities: self.intensities,
            security,
            session,
            model: self.model,
        })
    }
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<Config, ConfigError> {
    ConfigDocument::parse(text)?.resolve()
}

/// Reference configuration shipped with the crate.
pub const REFERENCE_CONFIG: &str = include_str!("../../../configs/reference.toml");

pub fn reference_config() -> Config {
    load_config(REFERENCE_CONFIG).expect("reference configuration is valid")
}

const SECTION_KEYS: &[(&str, &[&str])] = &[
    (
        "protocol",
        &[
            "eta_d",
            "Y0",
            "sigma_jit",
            "alpha",
            "beta_D",
            "R_rep",
            "sigma_cor",
            "sigma_coh",
            "T_f",
            "delta",
            "beta_e",
            "q",
            "d0",
            "p_alpha",
        ],
    ),
    ("intensities", &["mu", "p_mu"]),
    (
        "security",
        &[
            "eps_total",
            "eps_c",
            "eps_s",
            "eps_smooth",
            "eps_1",
            "eps_2",
            "eps_hash",
        ],
    ),
    ("session", &["distance_km", "running_time_s", "block_size"]),
    ("model", &["multi_pair_timing", "leak_model"]),
];

/// Section that owns a bare key such as `distance_km`.
pub fn section_of(key: &str) -> Option<&'static str> {
    SECTION_KEYS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

/// Unvalidated document that accepts key overrides before resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    table: toml::Table,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(ConfigDocument { table })
    }

    fn locate(key: &str) -> Result<(&str, &str), ConfigError> {
        match key.split_once('.') {
            Some((section, name)) => match SECTION_KEYS.iter().find(|(s, _)| *s == section) {
                Some((_, keys)) if keys.contains(&name) => Ok((section, name)),
                _ => Err(ConfigError::UnknownKey(key.to_string())),
            },
            None => section_of(key)
                .map(|s| (s, key))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string())),
        }
    }

    /// Sets `key` (bare or `section.key`) to a typed value.
    pub fn set(&mut self, key: &str, value: toml::Value) -> Result<(), ConfigError> {
        let (section, name) = Self::locate(key)?;
        let entry = self
            .table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(name.to_string(), value);
                Ok(())
            }
            _ => Err(ConfigError::Parse(format!("`{section}` is not a table"))),
        }
    }

    pub fn set_f64(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        self.set(key, toml::Value::Float(value))
    }

    /// Sets `key` from its textual form, e.g. `"40"`, `"[0.1, 0.05, 0.01]"`
    /// or `"alphabet"`.
    pub fn set_str(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        self.set(key, parsed)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("override `{assignment}` is not key=value")))?;
        self.set_str(key.trim(), value.trim())
    }

    pub fn resolve(&self) -> Result<Config, ConfigError> {
        let raw: RawConfig = toml::Value::Table(self.table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        raw.resolve()
    }
}

/// Converts a dispersion in ps/nm to the GVD coefficient in ps², using the
/// linear anchor 1e5 ps/nm ↔ 2e6 ps².
pub fn beta_from_dispersion(d_ps_per_nm: f64) -> Result<f64, ConfigError> {
    if !(d_ps_per_nm.is_finite() && d_ps_per_nm > 0.0) {
        return Err(invalid("dispersion must be positive"));
    }
    Ok(20.0 * d_ps_per_nm)
}
