//! Free-space transmittance of one optical path.
//!
//! The geometric term treats the transmitter output as a fundamental-mode
//! Gaussian beam and integrates its intensity over a centred circular
//! receiver aperture:
//!
//! ```text
//! z_R  = π ω₀² / λ
//! w(L) = ω₀ √(1 + (L / z_R)²)
//! η_geo(L) = 1 − exp(−2 (D/2)² / w(L)²)
//! ```
//!
//! Atmospheric absorption is a fixed dB/km figure and collection optics
//! contribute a constant factor. Pointing jitter, beam wander and
//! scintillation are not modelled.

use std::f64::consts::PI;

use crate::config::ChannelParams;
use crate::DomainError;

/// Per-factor breakdown of the transmittance of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTransmittance {
    pub geometric: f64,
    pub atmospheric: f64,
    pub collection: f64,
    pub total: f64,
}

/// Rayleigh range of the transmitted beam, m.
pub fn rayleigh_range(ch: &ChannelParams) -> f64 {
    PI * ch.beam_waist * ch.beam_waist / ch.wavelength
}

/// 1/e² beam radius after `path_length` metres.
pub fn beam_radius(path_length: f64, ch: &ChannelParams) -> f64 {
    let z = path_length / rayleigh_range(ch);
    ch.beam_waist * (1.0 + z * z).sqrt()
}

pub fn geometric_transmittance(path_length: f64, ch: &ChannelParams) -> Result<f64, DomainError> {
    DomainError::check_non_negative("path_length", path_length)?;
    Ok(geometric_unchecked(path_length, ch))
}

pub fn atmospheric_transmittance(path_length: f64, atm_loss_db_per_km: f64) -> Result<f64, DomainError> {
    DomainError::check_non_negative("path_length", path_length)?;
    DomainError::check_non_negative("atm_loss_db_per_km", atm_loss_db_per_km)?;
    Ok(atmospheric_unchecked(path_length, atm_loss_db_per_km / 1e3))
}

pub fn channel_transmittance(path_length: f64, ch: &ChannelParams) -> Result<ArmTransmittance, DomainError> {
    DomainError::check_non_negative("path_length", path_length)?;
    Ok(transmittance(path_length, ch))
}

fn geometric_unchecked(path_length: f64, ch: &ChannelParams) -> f64 {
    let w = beam_radius(path_length, ch);
    let r = ch.aperture_diameter / 2.0;
    // -expm1 keeps precision when the captured fraction is small.
    -(-2.0 * r * r / (w * w)).exp_m1()
}

fn atmospheric_unchecked(path_length: f64, db_per_m: f64) -> f64 {
    10f64.powf(-db_per_m * path_length / 10.0)
}

/// Transmittance for a path length the caller already knows is non-negative.
pub(crate) fn transmittance(path_length: f64, ch: &ChannelParams) -> ArmTransmittance {
    let geometric = geometric_unchecked(path_length, ch);
    let atmospheric = atmospheric_unchecked(path_length, ch.atm_loss_db_per_m);
    let collection = ch.collection_efficiency;
    ArmTransmittance { geometric, atmospheric, collection, total: geometric * atmospheric * collection }
}
