//! Configuration schema, validation and unit handling.
//!
//! Configuration files use human units carried in the field names
//! (`distance_km`, `coherence_time_ms`, ...). [`RawConfig`] mirrors the file
//! one-to-one; [`validate_config`] checks every invariant and produces a
//! [`SystemConfig`] whose quantities are all SI (metres, seconds,
//! dimensionless).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::DomainError;

/// Free-space light speed used when a config does not set `signal_speed_m_per_s`.
pub const DEFAULT_SIGNAL_SPEED: f64 = 2.998e8;

/// Maximum success probability of a linear-optics Bell state measurement.
pub const BSM_SUCCESS_PROB: f64 = 0.5;

const M_PER_KM: f64 = 1e3;
const M_PER_NM: f64 = 1e-9;
const M_PER_MM: f64 = 1e-3;
const S_PER_MS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Sps,
    Wcp,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Sps => "sps",
            SourceKind::Wcp => "wcp",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sync,
    Async,
    Bb84,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::Async => "async",
            Mode::Bb84 => "bb84",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Population over which the global-clock moments are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMOver {
    /// Trials that produced a detected, BSM-passing coincidence.
    #[default]
    Detected,
    /// Trials in which both memories were loaded, regardless of retrieval.
    Loaded,
}

/// How the Monte Carlo QBER is estimated from a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QberEstimator {
    /// `n_error / n_success` from sampled memory-error events.
    #[default]
    Sampled,
    /// `2E(1-E) / Q` evaluated at the empirical gain.
    MemoryModel,
}

// ---------------------------------------------------------------------------
// File representation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub wavelength_nm: f64,
    pub beam_waist_mm: f64,
    pub aperture_diameter_m: f64,
    pub collection_efficiency: f64,
    pub atm_loss_db_per_km: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 780.0,
            beam_waist_mm: 3.0,
            aperture_diameter_m: 0.1,
            collection_efficiency: 0.7,
            atm_loss_db_per_km: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    pub efficiency: f64,
    pub coherence_time_ms: f64,
    pub error_prob: f64,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self { efficiency: 0.5, coherence_time_ms: 0.25, error_prob: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_count_prob: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { efficiency: 1.0, dark_count_prob: 2.5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub mean_photon_number: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { kind: SourceKind::Sps, mean_photon_number: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub mode: Mode,
    pub distance_km: f64,
    pub signal_speed_m_per_s: f64,
    /// Error-correction efficiency `f`.
    pub ec_efficiency: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { mode: Mode::Sync, distance_km: 10.0, signal_speed_m_per_s: DEFAULT_SIGNAL_SPEED, ec_efficiency: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub trials: u64,
    pub seed: u64,
    pub max_rounds: u32,
    pub mean_m_over: MeanMOver,
    pub qber_estimator: QberEstimator,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            seed: 0x5eed,
            max_rounds: 10_000,
            mean_m_over: MeanMOver::default(),
            qber_estimator: QberEstimator::default(),
        }
    }
}

/// A configuration as written in a file. Every section and field is optional
/// and falls back to the default parameter set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub channel: ChannelSection,
    pub memory: MemorySection,
    pub detector: DetectorSection,
    pub source: SourceSection,
    pub protocol: ProtocolSection,
    pub simulation: SimulationSection,
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config sections serialize to TOML")
    }

    pub fn validate(&self) -> Result<SystemConfig, ConfigError> {
        validate_config(self)
    }
}

// ---------------------------------------------------------------------------
// Validated (SI) representation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// m
    pub wavelength: f64,
    /// 1/e² intensity radius at the transmitter, m
    pub beam_waist: f64,
    /// m
    pub aperture_diameter: f64,
    pub collection_efficiency: f64,
    /// dB per metre
    pub atm_loss_db_per_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryParams {
    /// Combined read-in/read-out efficiency.
    pub efficiency: f64,
    /// s
    pub coherence_time: f64,
    /// Per-memory bit-error probability.
    pub error_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Dark count probability per gate (BB84 baseline only).
    pub dark_count_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Mean photon number; ignored for single-photon sources.
    pub mean_photon_number: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub mode: Mode,
    /// Alice-to-Bob distance, m
    pub total_distance: f64,
    /// m/s
    pub signal_speed: f64,
    pub ec_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationControls {
    pub trials: u64,
    pub seed: u64,
    pub max_rounds: u32,
    pub mean_m_over: MeanMOver,
    pub qber_estimator: QberEstimator,
}

/// A fully validated experiment configuration in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub channel: ChannelParams,
    pub memory: MemoryParams,
    pub detector: DetectorParams,
    pub source: SourceSpec,
    pub protocol: ProtocolSpec,
    pub simulation: SimulationControls,
}

impl Default for SystemConfig {
    fn default() -> Self {
        validate_config(&RawConfig::default()).expect("default configuration is valid")
    }
}

impl SystemConfig {
    /// Converts back to file units.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            channel: ChannelSection {
                wavelength_nm: self.channel.wavelength / M_PER_NM,
                beam_waist_mm: self.channel.beam_waist / M_PER_MM,
                aperture_diameter_m: self.channel.aperture_diameter,
                collection_efficiency: self.channel.collection_efficiency,
                atm_loss_db_per_km: self.channel.atm_loss_db_per_m * M_PER_KM,
            },
            memory: MemorySection {
                efficiency: self.memory.efficiency,
                coherence_time_ms: self.memory.coherence_time / S_PER_MS,
                error_prob: self.memory.error_prob,
            },
            detector: DetectorSection {
                efficiency: self.detector.efficiency,
                dark_count_prob: self.detector.dark_count_prob,
            },
            source: SourceSection { kind: self.source.kind, mean_photon_number: self.source.mean_photon_number },
            protocol: ProtocolSection {
                mode: self.protocol.mode,
                distance_km: self.protocol.total_distance / M_PER_KM,
                signal_speed_m_per_s: self.protocol.signal_speed,
                ec_efficiency: self.protocol.ec_efficiency,
            },
            simulation: SimulationSection {
                trials: self.simulation.trials,
                seed: self.simulation.seed,
                max_rounds: self.simulation.max_rounds,
                mean_m_over: self.simulation.mean_m_over,
                qber_estimator: self.simulation.qber_estimator,
            },
        }
    }

    /// Re-checks every invariant on an already-converted config. Used after
    /// fields are edited in place (sweeps, CLI overrides).
    pub fn revalidate(&self) -> Result<SystemConfig, ConfigError> {
        let mut v = Violations::default();
        check_si(self, &mut v);
        v.finish()?;
        Ok(self.clone())
    }

    pub fn distance_km(&self) -> f64 {
        self.protocol.total_distance / M_PER_KM
    }

    pub fn coherence_time_ms(&self) -> f64 {
        self.memory.coherence_time / S_PER_MS
    }

    /// Duration of one global clock unit for this config, s.
    pub fn clock_unit(&self) -> f64 {
        self.protocol.total_distance / self.protocol.signal_speed
    }

    /// Path length travelled by each arm: half the link for the MDI modes
    /// (relay midway), the full link for direct BB84.
    pub fn arm_length(&self) -> f64 {
        match self.protocol.mode {
            Mode::Bb84 => self.protocol.total_distance,
            Mode::Sync | Mode::Async => self.protocol.total_distance / 2.0,
        }
    }

    pub fn with_distance_km(mut self, km: f64) -> Self {
        self.protocol.total_distance = km * M_PER_KM;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.protocol.mode = mode;
        self
    }

    pub fn with_source(mut self, kind: SourceKind, mean_photon_number: f64) -> Self {
        self.source.kind = kind;
        self.source.mean_photon_number = mean_photon_number;
        self
    }

    pub fn with_memory(mut self, efficiency: f64, coherence_time_ms: f64) -> Self {
        self.memory.efficiency = efficiency;
        self.memory.coherence_time = coherence_time_ms * S_PER_MS;
        self
    }

    pub fn with_detector_efficiency(mut self, efficiency: f64) -> Self {
        self.detector.efficiency = efficiency;
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.simulation.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulation.seed = seed;
        self
    }
}

/// Duration of one global clock unit: the herald travels half the link and
/// the confirmation travels back, `L / v` in total.
pub fn clock_unit(total_distance_m: f64, signal_speed_m_per_s: f64) -> Result<f64, DomainError> {
    DomainError::check_positive("total_distance", total_distance_m)?;
    DomainError::check_positive("signal_speed", signal_speed_m_per_s)?;
    Ok(total_distance_m / signal_speed_m_per_s)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FieldViolation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<FieldViolation>),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn violations(&self) -> &[FieldViolation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }

    /// True when some violation names `path`.
    pub fn names(&self, path: &str) -> bool {
        self.violations().iter().any(|v| v.path == path)
    }
}

fn join_violations(v: &[FieldViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Default)]
struct Violations(Vec<FieldViolation>);

impl Violations {
    fn push(&mut self, path: &str, message: String) {
        self.0.push(FieldViolation { path: path.to_string(), message });
    }

    fn positive(&mut self, path: &str, x: f64) {
        if x.is_nan() || x <= 0.0 {
            self.push(path, format!("must be > 0, got {x}"));
        }
    }

    fn non_negative(&mut self, path: &str, x: f64) {
        if x.is_nan() || x < 0.0 || x.is_infinite() {
            self.push(path, format!("must be a finite value >= 0, got {x}"));
        }
    }

    fn fraction(&mut self, path: &str, x: f64) {
        if !(0.0..=1.0).contains(&x) {
            self.push(path, format!("must lie in [0, 1], got {x}"));
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(self.0))
        }
    }
}

fn check_si(cfg: &SystemConfig, v: &mut Violations) {
    let finite_positive = |v: &mut Violations, path: &str, x: f64| {
        v.positive(path, x);
        if x.is_infinite() {
            v.push(path, "must be finite".to_string());
        }
    };
    finite_positive(v, "channel.wavelength_nm", cfg.channel.wavelength);
    finite_positive(v, "channel.beam_waist_mm", cfg.channel.beam_waist);
    finite_positive(v, "channel.aperture_diameter_m", cfg.channel.aperture_diameter);
    v.fraction("channel.collection_efficiency", cfg.channel.collection_efficiency);
    v.non_negative("channel.atm_loss_db_per_km", cfg.channel.atm_loss_db_per_m);

    v.fraction("memory.efficiency", cfg.memory.efficiency);
    // An infinite coherence time is the no-decay limit and is allowed.
    v.positive("memory.coherence_time_ms", cfg.memory.coherence_time);
    v.fraction("memory.error_prob", cfg.memory.error_prob);

    v.fraction("detector.efficiency", cfg.detector.efficiency);
    v.fraction("detector.dark_count_prob", cfg.detector.dark_count_prob);

    if cfg.source.kind == SourceKind::Wcp {
        finite_positive(v, "source.mean_photon_number", cfg.source.mean_photon_number);
    }

    finite_positive(v, "protocol.distance_km", cfg.protocol.total_distance);
    finite_positive(v, "protocol.signal_speed_m_per_s", cfg.protocol.signal_speed);
    v.non_negative("protocol.ec_efficiency", cfg.protocol.ec_efficiency);

    if cfg.simulation.trials < 1 {
        v.push("simulation.trials", "must be >= 1, got 0".to_string());
    }
    if cfg.simulation.max_rounds < 1 {
        v.push("simulation.max_rounds", "must be >= 1, got 0".to_string());
    }
}

/// Checks every invariant and converts the file units to SI. All violations
/// are reported together, each under its field path.
pub fn validate_config(raw: &RawConfig) -> Result<SystemConfig, ConfigError> {
    let cfg = SystemConfig {
        channel: ChannelParams {
            wavelength: raw.channel.wavelength_nm * M_PER_NM,
            beam_waist: raw.channel.beam_waist_mm * M_PER_MM,
            aperture_diameter: raw.channel.aperture_diameter_m,
            collection_efficiency: raw.channel.collection_efficiency,
            atm_loss_db_per_m: raw.channel.atm_loss_db_per_km / M_PER_KM,
        },
        memory: MemoryParams {
            efficiency: raw.memory.efficiency,
            coherence_time: raw.memory.coherence_time_ms * S_PER_MS,
            error_prob: raw.memory.error_prob,
        },
        detector: DetectorParams { efficiency: raw.detector.efficiency, dark_count_prob: raw.detector.dark_count_prob },
        source: SourceSpec { kind: raw.source.kind, mean_photon_number: raw.source.mean_photon_number },
        protocol: ProtocolSpec {
            mode: raw.protocol.mode,
            total_distance: raw.protocol.distance_km * M_PER_KM,
            signal_speed: raw.protocol.signal_speed_m_per_s,
            ec_efficiency: raw.protocol.ec_efficiency,
        },
        simulation: SimulationControls {
            trials: raw.simulation.trials,
            seed: raw.simulation.seed,
            max_rounds: raw.simulation.max_rounds,
            mean_m_over: raw.simulation.mean_m_over,
            qber_estimator: raw.simulation.qber_estimator,
        },
    };
    let mut v = Violations::default();
    check_si(&cfg, &mut v);
    v.finish()?;
    Ok(cfg)
}
