//! Aggregation of Monte Carlo tallies, parameter sweeps and the extraction of
//! crossover and QBER-threshold distances from rate-vs-distance series.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{self, RatePoint};
use crate::config::{MeanMOver, Mode, QberEstimator, SourceKind, SystemConfig};
use crate::engine::{self, TallySummary};
use crate::output::{Model, OutputRow};

/// Successes below which an estimate is flagged as low-statistics.
pub const LOW_STATISTICS_SUCCESSES: f64 = 100.0;

/// Rates and clock statistics estimated from one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub q_gain: f64,
    /// Binomial standard error of `q_gain`.
    pub q_se: f64,
    /// Capped QBER; `None` when there were no successes.
    pub qber: Option<f64>,
    pub r_corr: f64,
    /// bits/s
    pub r_total: f64,
    /// Mean global-clock units; `None` when there were no successes.
    pub mean_m: Option<f64>,
    pub mean_m_se: f64,
    pub std_m: f64,
    /// s
    pub mean_clock_time: f64,
    /// s
    pub std_clock_time: f64,
    pub flags: EstimateFlags,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateFlags {
    pub no_successes: bool,
    pub low_statistics: bool,
    pub truncated: bool,
}

impl EstimateFlags {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.no_successes {
            out.push("no_successes");
        }
        if self.low_statistics {
            out.push("low_statistics");
        }
        if self.truncated {
            out.push("truncated");
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("tally holds no trials")]
    EmptyTally,
}

/// Turns a batch tally into gain, QBER and rates.
///
/// The clock moments come from detected successes or loaded coincidences as
/// selected by `cfg.simulation.mean_m_over`; synchronous batches always use
/// `⟨m⟩ = 1` in the rate.
pub fn aggregate(tally: &TallySummary, cfg: &SystemConfig) -> Result<RateEstimate, AggregateError> {
    if tally.n_trials == 0 {
        return Err(AggregateError::EmptyTally);
    }
    let n = tally.n_trials as f64;
    let q = tally.n_success as f64 / n;
    let q_se = (q * (1.0 - q) / n).sqrt();

    let qber = if tally.n_success == 0 {
        None
    } else {
        Some(match cfg.simulation.qber_estimator {
            QberEstimator::Sampled => (tally.n_error as f64 / tally.n_success as f64).min(analytic::QBER_CAP),
            QberEstimator::MemoryModel => {
                analytic::qber_from_gain(cfg.memory.error_prob, q).expect("q > 0 with successes")
            }
        })
    };

    let (count, sum, sum_sq) = match cfg.simulation.mean_m_over {
        MeanMOver::Detected => (tally.n_success, tally.sum_m, tally.sum_m_sq),
        MeanMOver::Loaded => (tally.n_loaded, tally.loaded_sum_m, tally.loaded_sum_m_sq),
    };
    let (mean_m, std_m) = if count == 0 {
        (None, 0.0)
    } else {
        let c = count as f64;
        let mean = sum as f64 / c;
        let var = (sum_sq as f64 / c - mean * mean).max(0.0);
        (Some(mean), var.sqrt())
    };
    let mean_m_se = if count > 0 { std_m / (count as f64).sqrt() } else { 0.0 };

    let rate_m = match cfg.protocol.mode {
        Mode::Async => mean_m.unwrap_or(1.0),
        Mode::Sync | Mode::Bb84 => 1.0,
    };
    let r_corr = qber.map_or(0.0, |e| analytic::corrected_rate(q, e, cfg.protocol.ec_efficiency));
    let r_total = analytic::total_rate(r_corr, cfg.protocol.total_distance, cfg.protocol.signal_speed, rate_m);
    let t_unit = cfg.clock_unit();

    Ok(RateEstimate {
        q_gain: q,
        q_se,
        qber,
        r_corr,
        r_total,
        mean_m,
        mean_m_se,
        std_m,
        mean_clock_time: mean_m.unwrap_or(0.0) * t_unit,
        std_clock_time: std_m * t_unit,
        flags: EstimateFlags {
            no_successes: tally.n_success == 0,
            low_statistics: (tally.n_success as f64) < LOW_STATISTICS_SUCCESSES,
            truncated: tally.n_truncated > 0,
        },
    })
}

/// Runs a batch for `cfg` and aggregates it.
pub fn simulate(cfg: &SystemConfig) -> (TallySummary, RateEstimate) {
    let tally = engine::run_batch(cfg);
    let est = aggregate(&tally, cfg).expect("validated configs run at least one trial");
    (tally, est)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Axes of a parameter sweep; the run set is their Cartesian product.
///
/// Axes that do not apply to a point collapse: single-photon sources ignore
/// `mean_photon_numbers` and BB84 ignores the memory axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub distances_km: Vec<f64>,
    pub memory_efficiencies: Vec<f64>,
    pub coherence_times_ms: Vec<f64>,
    pub mean_photon_numbers: Vec<f64>,
    pub modes: Vec<Mode>,
    pub sources: Vec<SourceKind>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("sweep axis `{0}` is empty")]
    EmptyAxis(&'static str),
}

impl SweepGrid {
    /// A grid holding the single operating point of `cfg`.
    pub fn single(cfg: &SystemConfig) -> Self {
        Self {
            distances_km: vec![cfg.distance_km()],
            memory_efficiencies: vec![cfg.memory.efficiency],
            coherence_times_ms: vec![cfg.coherence_time_ms()],
            mean_photon_numbers: vec![cfg.source.mean_photon_number],
            modes: vec![cfg.protocol.mode],
            sources: vec![cfg.source.kind],
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let axes: [(&'static str, bool); 6] = [
            ("distances_km", self.distances_km.is_empty()),
            ("memory_efficiencies", self.memory_efficiencies.is_empty()),
            ("coherence_times_ms", self.coherence_times_ms.is_empty()),
            ("mean_photon_numbers", self.mean_photon_numbers.is_empty()),
            ("modes", self.modes.is_empty()),
            ("sources", self.sources.is_empty()),
        ];
        match axes.iter().find(|(_, empty)| *empty) {
            Some((name, _)) => Err(GridError::EmptyAxis(name)),
            None => Ok(()),
        }
    }

    /// Operating points in deterministic grid order (mode, source, μ, η_mem,
    /// τ, distance), with non-applicable axes collapsed.
    pub fn points(&self) -> Vec<OperatingPoint> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            for &source in &self.sources {
                let mus: Vec<Option<f64>> = match source {
                    SourceKind::Sps => vec![None],
                    SourceKind::Wcp => self.mean_photon_numbers.iter().copied().map(Some).collect(),
                };
                let memories: Vec<(Option<f64>, Option<f64>)> = match mode {
                    Mode::Bb84 => vec![(None, None)],
                    Mode::Sync | Mode::Async => self
                        .memory_efficiencies
                        .iter()
                        .flat_map(|&e| self.coherence_times_ms.iter().map(move |&t| (Some(e), Some(t))))
                        .collect(),
                };
                for &mu in &mus {
                    for &(eta_mem, tau_coh_ms) in &memories {
                        for &distance_km in &self.distances_km {
                            out.push(OperatingPoint { distance_km, mode, source, mu, eta_mem, tau_coh_ms });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Default distance grid: 1 km steps to 35 km (sync) or 50 km (async).
pub fn default_distances(mode: Mode) -> Vec<f64> {
    let max = match mode {
        Mode::Async => 50,
        Mode::Sync | Mode::Bb84 => 35,
    };
    (1..=max).map(f64::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub distance_km: f64,
    pub mode: Mode,
    pub source: SourceKind,
    /// `None` for single-photon sources.
    pub mu: Option<f64>,
    /// `None` where memories do not apply (BB84).
    pub eta_mem: Option<f64>,
    pub tau_coh_ms: Option<f64>,
}

impl OperatingPoint {
    /// `base` with this point's parameters applied, revalidated.
    pub fn apply(&self, base: &SystemConfig) -> Result<SystemConfig, crate::ConfigError> {
        let mut cfg = base.clone().with_distance_km(self.distance_km).with_mode(self.mode);
        cfg.source.kind = self.source;
        if let Some(mu) = self.mu {
            cfg.source.mean_photon_number = mu;
        }
        if let (Some(e), Some(t)) = (self.eta_mem, self.tau_coh_ms) {
            cfg = cfg.with_memory(e, t);
        }
        cfg.revalidate()
    }
}

/// Which models a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Monte Carlo rows plus every closed-form model that applies.
    Full,
    /// Closed-form rows only.
    AnalyticOnly,
}

/// Evaluates every grid point. Rows come back in grid order; a point that
/// fails validation yields a single row carrying the error instead of
/// aborting the sweep.
///
/// Monte Carlo point `i` is seeded with `derive_seed(base.seed, i)`.
pub fn sweep(grid: &SweepGrid, base: &SystemConfig, kind: SweepKind) -> Result<Vec<OutputRow>, GridError> {
    grid.validate()?;
    let points = grid.points();
    let rows: Vec<Vec<OutputRow>> = points
        .par_iter()
        .enumerate()
        .map(|(i, point)| evaluate_point(point, base, kind, engine::derive_seed(base.simulation.seed, i as u64)))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn evaluate_point(point: &OperatingPoint, base: &SystemConfig, kind: SweepKind, seed: u64) -> Vec<OutputRow> {
    let cfg = match point.apply(base) {
        Ok(cfg) => cfg.with_seed(seed),
        Err(e) => {
            let mut row = OutputRow::for_point(point, Model::Analytic);
            row.push_flag(&format!("error: {e}"));
            return vec![row];
        }
    };
    let mut rows = Vec::new();
    let analytic_q = match point.mode {
        Mode::Sync => Some(analytic::sync_gain(&cfg)),
        Mode::Async => analytic::async_sps_rate_point(&cfg).map(|p| p.gain),
        Mode::Bb84 => None,
    };
    if kind == SweepKind::Full && point.mode != Mode::Bb84 {
        let (tally, est) = simulate(&cfg);
        let mut row = OutputRow::from_estimate(point, &cfg, &tally, &est);
        if let Some(q) = analytic_q {
            if q * (cfg.simulation.trials as f64) < LOW_STATISTICS_SUCCESSES && !est.flags.low_statistics {
                row.push_flag("low_statistics");
            }
        }
        rows.push(row);
    }
    match point.mode {
        Mode::Sync => {
            rows.push(OutputRow::from_rate_point(point, &cfg, Model::Analytic, &analytic::sync_rate_point(&cfg)))
        }
        Mode::Async => {
            if let Some(p) = analytic::async_sps_rate_point(&cfg) {
                rows.push(OutputRow::from_rate_point(point, &cfg, Model::Analytic, &p));
            }
            let mut guide = OutputRow::from_rate_point(point, &cfg, Model::Guide, &analytic::async_guide_curve(&cfg));
            guide.push_flag("guide");
            rows.push(guide);
        }
        Mode::Bb84 => rows.push(OutputRow::from_rate_point(point, &cfg, Model::Bb84, &analytic::bb84_reference(&cfg))),
    }
    rows
}

/// Rates for a single configured point from the closed-form model matching
/// its mode.
pub fn analytic_point(cfg: &SystemConfig) -> RatePoint {
    match cfg.protocol.mode {
        Mode::Sync => analytic::sync_rate_point(cfg),
        Mode::Async => analytic::async_sps_rate_point(cfg).unwrap_or_else(|| analytic::async_guide_curve(cfg)),
        Mode::Bb84 => analytic::bb84_reference(cfg),
    }
}

// ---------------------------------------------------------------------------
// Series analysis
// ---------------------------------------------------------------------------

/// A quantity sampled on an increasing distance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub distances_km: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(distances_km: Vec<f64>, values: Vec<f64>) -> Self {
        Self { distances_km, values }
    }

    pub fn from_fn(distances_km: &[f64], mut f: impl FnMut(f64) -> f64) -> Self {
        Self { distances_km: distances_km.to_vec(), values: distances_km.iter().map(|&d| f(d)).collect() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series need at least two points, got {0}")]
    TooShort(usize),
    #[error("series lengths differ from their distance grids")]
    Ragged,
    #[error("series are sampled on different distance grids")]
    MismatchedGrids,
    #[error("distance grid is not strictly increasing")]
    NotIncreasing,
    #[error("series never drops to or below the threshold {0}")]
    AlwaysAbove(f64),
}

fn check_series(s: &Series) -> Result<(), SeriesError> {
    if s.distances_km.len() != s.values.len() {
        return Err(SeriesError::Ragged);
    }
    if s.distances_km.len() < 2 {
        return Err(SeriesError::TooShort(s.distances_km.len()));
    }
    if s.distances_km.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
        return Err(SeriesError::NotIncreasing);
    }
    Ok(())
}

/// Smallest distance at which `a ≥ b`, interpolated linearly in
/// (distance, log rate). Brackets with a non-positive rate fall back to
/// linear interpolation of `a − b`. `Ok(None)` when `a` never catches up.
pub fn find_crossover(a: &Series, b: &Series) -> Result<Option<f64>, SeriesError> {
    check_series(a)?;
    check_series(b)?;
    if a.distances_km != b.distances_km {
        return Err(SeriesError::MismatchedGrids);
    }
    let d = &a.distances_km;
    if a.values[0] >= b.values[0] {
        return Ok(Some(d[0]));
    }
    for i in 1..d.len() {
        if a.values[i] >= b.values[i] {
            let (a0, a1, b0, b1) = (a.values[i - 1], a.values[i], b.values[i - 1], b.values[i]);
            let (g0, g1) = if a0 > 0.0 && a1 > 0.0 && b0 > 0.0 && b1 > 0.0 {
                (a0.ln() - b0.ln(), a1.ln() - b1.ln())
            } else {
                (a0 - b0, a1 - b1)
            };
            // g0 < 0 <= g1
            let frac = if g1 == g0 { 1.0 } else { -g0 / (g1 - g0) };
            return Ok(Some(d[i - 1] + frac * (d[i] - d[i - 1])));
        }
    }
    Ok(None)
}

/// Largest distance at which the QBER stays at or below `threshold`,
/// interpolated linearly toward the first grid point above it.
pub fn qber_threshold_distance(series: &Series, threshold: f64) -> Result<f64, SeriesError> {
    check_series(series)?;
    let d = &series.distances_km;
    let q = &series.values;
    let last_ok = q.iter().rposition(|&v| v <= threshold).ok_or(SeriesError::AlwaysAbove(threshold))?;
    if last_ok + 1 == q.len() {
        return Ok(d[last_ok]);
    }
    let (q0, q1) = (q[last_ok], q[last_ok + 1]);
    let frac = if q1.is_finite() && q1 > q0 { (threshold - q0) / (q1 - q0) } else { 0.0 };
    Ok(d[last_ok] + frac * (d[last_ok + 1] - d[last_ok]))
}
