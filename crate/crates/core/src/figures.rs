//! Named comparison grids.
//!
//! Each figure is one [`SweepGrid`] plus the value columns that get split
//! out into per-curve plot files.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::config::{Mode, SourceKind};
use crate::experiment::SweepGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Sync rates for several memory efficiencies at τ = 0.25 ms.
    SyncEff,
    /// Sync rates for several coherence times at η_mem = 0.5.
    SyncCoh,
    AsyncEff,
    AsyncCoh,
    /// Mean and spread of the async global clock time.
    MeanGc,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown figure `{given}`; valid names: {}", Figure::names().join(", "))]
pub struct UnknownFigure {
    pub given: String,
}

const EFFICIENCIES: [f64; 3] = [0.9, 0.5, 0.1];
const COHERENCE_TIMES_MS: [f64; 3] = [0.5, 0.1, 0.01];
const MEAN_PHOTON_NUMBERS: [f64; 2] = [0.05, 0.7];

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::SyncEff, Figure::SyncCoh, Figure::AsyncEff, Figure::AsyncCoh, Figure::MeanGc];

    pub fn name(self) -> &'static str {
        match self {
            Figure::SyncEff => "sync-eff",
            Figure::SyncCoh => "sync-coh",
            Figure::AsyncEff => "async-eff",
            Figure::AsyncCoh => "async-coh",
            Figure::MeanGc => "mean-gc",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|f| f.name()).collect()
    }

    pub fn grid(self) -> SweepGrid {
        let sync_km: Vec<f64> = (1..=35).map(f64::from).collect();
        let async_km: Vec<f64> = (1..=50).map(f64::from).collect();
        let both = vec![SourceKind::Sps, SourceKind::Wcp];
        match self {
            Figure::SyncEff => SweepGrid {
                distances_km: sync_km,
                memory_efficiencies: EFFICIENCIES.to_vec(),
                coherence_times_ms: vec![0.25],
                mean_photon_numbers: MEAN_PHOTON_NUMBERS.to_vec(),
                modes: vec![Mode::Sync, Mode::Bb84],
                sources: both,
            },
            Figure::SyncCoh => SweepGrid {
                distances_km: sync_km,
                memory_efficiencies: vec![0.5],
                coherence_times_ms: COHERENCE_TIMES_MS.to_vec(),
                mean_photon_numbers: MEAN_PHOTON_NUMBERS.to_vec(),
                modes: vec![Mode::Sync, Mode::Bb84],
                sources: both,
            },
            // The sync rows let the async enhancement be read off the table.
            Figure::AsyncEff => SweepGrid {
                distances_km: async_km,
                memory_efficiencies: EFFICIENCIES.to_vec(),
                coherence_times_ms: vec![0.25],
                mean_photon_numbers: MEAN_PHOTON_NUMBERS.to_vec(),
                modes: vec![Mode::Async, Mode::Sync, Mode::Bb84],
                sources: both,
            },
            Figure::AsyncCoh => SweepGrid {
                distances_km: async_km,
                memory_efficiencies: vec![0.5],
                coherence_times_ms: COHERENCE_TIMES_MS.to_vec(),
                mean_photon_numbers: MEAN_PHOTON_NUMBERS.to_vec(),
                modes: vec![Mode::Async, Mode::Sync, Mode::Bb84],
                sources: both,
            },
            Figure::MeanGc => SweepGrid {
                distances_km: async_km,
                memory_efficiencies: vec![0.5],
                coherence_times_ms: vec![0.01, 0.1, 0.5],
                mean_photon_numbers: vec![0.7],
                modes: vec![Mode::Async],
                sources: vec![SourceKind::Sps],
            },
        }
    }

    /// Row columns written out as per-curve plot files.
    pub fn plot_columns(self) -> &'static [&'static str] {
        match self {
            Figure::MeanGc => &["mean_clock_ms", "std_clock_ms"],
            _ => &["r_total_hz", "qber"],
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = UnknownFigure;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| UnknownFigure { given: s.to_string() })
    }
}
