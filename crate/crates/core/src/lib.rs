//! Key-rate models for memory-assisted measurement-device-independent QKD
//! (MA-MDI-QKD) over free-space metropolitan links.
//!
//! The crate pairs closed-form rate equations with a stochastic
//! global/local-clock Monte Carlo engine:
//!
//! - [`config`]: configuration schema, validation and SI normalization.
//! - [`channel`]: Gaussian-beam geometric loss, atmospheric absorption and
//!   collection optics.
//! - [`analytic`]: gains, QBER, error-corrected rates, the BB84 baseline, the
//!   asynchronous guide curve and the exact absorbing-chain solution of the
//!   asynchronous clock process.
//! - [`engine`]: per-trial sampling of memory loading, decay, detection and
//!   Bell-state measurement with reproducible per-trial random streams.
//! - [`experiment`]: aggregation, parameter sweeps, crossover and
//!   QBER-threshold extraction.
//! - [`output`]: the row schema and its CSV/JSON/plot-data encodings.
//! - [`figures`]: the predefined comparison grids.
//!
//! ```
//! use mamdi::{analytic, SystemConfig};
//!
//! let cfg = SystemConfig::default().with_distance_km(10.0);
//! let point = analytic::sync_rate_point(&cfg);
//! assert!(point.gain > 3.0e-5 && point.gain < 3.2e-5);
//! ```

pub mod analytic;
pub mod channel;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod figures;
pub mod output;

pub use config::{
    clock_unit, validate_config, ConfigError, MeanMOver, Mode, QberEstimator, RawConfig, SourceKind, SystemConfig,
};

use thiserror::Error;

/// A numeric argument outside the domain of a model function.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} = {value} is outside its domain ({expected})")]
    OutOfRange { name: &'static str, value: f64, expected: &'static str },
}

impl DomainError {
    pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<(), DomainError> {
        if value > 0.0 {
            Ok(())
        } else {
            Err(DomainError::OutOfRange { name, value, expected: "> 0" })
        }
    }

    pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<(), DomainError> {
        if value >= 0.0 {
            Ok(())
        } else {
            Err(DomainError::OutOfRange { name, value, expected: ">= 0" })
        }
    }

    pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<(), DomainError> {
        if (0.0..=1.0).contains(&value) {
            Ok(())
        } else {
            Err(DomainError::OutOfRange { name, value, expected: "[0, 1]" })
        }
    }
}
