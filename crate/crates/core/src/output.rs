//! Row schema and its file encodings.
//!
//! CSV files start with `#`-prefixed comment lines (tool version, config
//! hash, seed) followed by one header row whose column names are the
//! [`OutputRow`] field names. Floats use the shortest representation that
//! parses back to the same value, so a table survives a write/read cycle
//! unchanged. JSON output is an object with a `header` block and a `rows`
//! array of objects keyed like the CSV columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::RatePoint;
use crate::config::{Mode, SourceKind, SystemConfig};
use crate::engine::TallySummary;
use crate::experiment::{OperatingPoint, RateEstimate};

pub const TOOL_NAME: &str = "mamdi";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Mc,
    Analytic,
    Guide,
    Bb84,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Mc => "mc",
            Model::Analytic => "analytic",
            Model::Guide => "guide",
            Model::Bb84 => "bb84",
        }
    }
}

/// One self-describing result row. Empty cells mean "not applicable" or
/// "undefined"; `flags` says which.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub distance_km: f64,
    pub mode: Mode,
    pub source: SourceKind,
    pub mu: Option<f64>,
    pub eta_mem: Option<f64>,
    pub tau_coh_ms: Option<f64>,
    pub model: Model,
    pub q_gain: Option<f64>,
    pub q_se: Option<f64>,
    pub qber: Option<f64>,
    pub r_corr: Option<f64>,
    pub r_total_hz: Option<f64>,
    pub mean_m: Option<f64>,
    pub std_m: Option<f64>,
    pub mean_clock_ms: Option<f64>,
    pub std_clock_ms: Option<f64>,
    pub n_trials: Option<u64>,
    pub n_success: Option<u64>,
    pub n_error: Option<u64>,
    pub n_truncated: Option<u64>,
    pub seed: Option<u64>,
    /// `;`-separated markers such as `low_statistics`, `no_successes`,
    /// `guide`, `memory_not_applicable` or `error: ...`.
    pub flags: String,
}

impl OutputRow {
    /// A row with the operating point filled in and every result empty.
    pub fn for_point(point: &OperatingPoint, model: Model) -> Self {
        let mut row = Self {
            distance_km: point.distance_km,
            mode: point.mode,
            source: point.source,
            mu: point.mu,
            eta_mem: point.eta_mem,
            tau_coh_ms: point.tau_coh_ms,
            model,
            q_gain: None,
            q_se: None,
            qber: None,
            r_corr: None,
            r_total_hz: None,
            mean_m: None,
            std_m: None,
            mean_clock_ms: None,
            std_clock_ms: None,
            n_trials: None,
            n_success: None,
            n_error: None,
            n_truncated: None,
            seed: None,
            flags: String::new(),
        };
        if point.mode == Mode::Bb84 {
            row.push_flag("memory_not_applicable");
        }
        row
    }

    pub fn from_estimate(point: &OperatingPoint, cfg: &SystemConfig, tally: &TallySummary, est: &RateEstimate) -> Self {
        let mut row = Self::for_point(point, Model::Mc);
        row.q_gain = Some(est.q_gain);
        row.q_se = Some(est.q_se);
        row.qber = est.qber;
        row.r_corr = Some(est.r_corr);
        row.r_total_hz = Some(est.r_total);
        row.mean_m = est.mean_m;
        row.std_m = est.mean_m.map(|_| est.std_m);
        row.mean_clock_ms = est.mean_m.map(|_| est.mean_clock_time * 1e3);
        row.std_clock_ms = est.mean_m.map(|_| est.std_clock_time * 1e3);
        row.n_trials = Some(tally.n_trials);
        row.n_success = Some(tally.n_success);
        row.n_error = Some(tally.n_error);
        row.n_truncated = Some(tally.n_truncated);
        row.seed = Some(cfg.simulation.seed);
        for label in est.flags.labels() {
            row.push_flag(label);
        }
        row
    }

    pub fn from_rate_point(point: &OperatingPoint, cfg: &SystemConfig, model: Model, p: &RatePoint) -> Self {
        let mut row = Self::for_point(point, model);
        row.q_gain = Some(p.gain);
        row.qber = p.qber;
        row.r_corr = Some(p.corrected_rate);
        row.r_total_hz = Some(p.total_rate);
        if point.mode != Mode::Bb84 {
            row.mean_m = Some(p.mean_m);
            row.mean_clock_ms = Some(p.mean_m * cfg.clock_unit() * 1e3);
        }
        if p.qber.is_none() {
            row.push_flag("qber_undefined");
        }
        row
    }

    pub fn push_flag(&mut self, flag: &str) {
        if !self.flags.is_empty() {
            self.flags.push(';');
        }
        self.flags.push_str(flag);
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split(';').any(|f| f == flag)
    }
}

/// Provenance recorded at the top of every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Free-form description (subcommand, figure name).
    pub description: String,
}

impl FileHeader {
    pub fn new(cfg: &SystemConfig, description: impl Into<String>) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.simulation.seed,
            description: description.into(),
        }
    }

    fn comment_lines(&self) -> String {
        format!(
            "# {} {}\n# config_sha256: {}\n# seed: {}\n# {}\n",
            self.tool, self.version, self.config_sha256, self.seed, self.description
        )
    }
}

/// SHA-256 of the canonical TOML form of a config.
pub fn config_hash(cfg: &SystemConfig) -> String {
    let digest = Sha256::digest(cfg.to_raw().to_toml_string().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn to_csv(header: &FileHeader, rows: &[OutputRow]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    let body = w.into_inner().map_err(|e| e.into_error())?;
    let mut out = header.comment_lines();
    out.push_str(std::str::from_utf8(&body).expect("csv writer emits UTF-8"));
    Ok(out)
}

pub fn from_csv(text: &str) -> Result<Vec<OutputRow>, csv::Error> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes()).deserialize().collect()
}

pub const CSV_COLUMNS: [&str; 22] = [
    "distance_km",
    "mode",
    "source",
    "mu",
    "eta_mem",
    "tau_coh_ms",
    "model",
    "q_gain",
    "q_se",
    "qber",
    "r_corr",
    "r_total_hz",
    "mean_m",
    "std_m",
    "mean_clock_ms",
    "std_clock_ms",
    "n_trials",
    "n_success",
    "n_error",
    "n_truncated",
    "seed",
    "flags",
];

#[derive(Serialize)]
struct JsonDocument<'a> {
    header: &'a FileHeader,
    rows: &'a [OutputRow],
}

pub fn to_json(header: &FileHeader, rows: &[OutputRow]) -> String {
    let mut s = serde_json::to_string_pretty(&JsonDocument { header, rows }).expect("rows serialize to JSON");
    s.push('\n');
    s
}

/// One plotted curve: a label and its (distance, value) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub column: &'static str,
    pub points: Vec<(f64, f64)>,
}

/// Splits rows into curves keyed by everything but distance, one curve per
/// requested value column. Rows with an empty value are skipped.
pub fn curves(rows: &[OutputRow], columns: &[&'static str]) -> Vec<Curve> {
    let mut grouped: BTreeMap<String, Vec<&OutputRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(curve_key(row)).or_default().push(row);
    }
    let mut out = Vec::new();
    for (key, members) in grouped {
        for &column in columns {
            let points: Vec<(f64, f64)> =
                members.iter().filter_map(|r| column_value(r, column).map(|v| (r.distance_km, v))).collect();
            if !points.is_empty() {
                out.push(Curve { name: format!("{key}__{column}"), column, points });
            }
        }
    }
    out
}

fn curve_key(row: &OutputRow) -> String {
    let mut key = format!("{}_{}_{}", row.model.as_str(), row.mode, row.source);
    if let Some(mu) = row.mu {
        let _ = write!(key, "_mu{mu}");
    }
    if let Some(e) = row.eta_mem {
        let _ = write!(key, "_eta{e}");
    }
    if let Some(t) = row.tau_coh_ms {
        let _ = write!(key, "_tau{t}ms");
    }
    key
}

fn column_value(row: &OutputRow, column: &str) -> Option<f64> {
    match column {
        "q_gain" => row.q_gain,
        "qber" => row.qber,
        "r_corr" => row.r_corr,
        "r_total_hz" => row.r_total_hz,
        "mean_m" => row.mean_m,
        "std_m" => row.std_m,
        "mean_clock_ms" => row.mean_clock_ms,
        "std_clock_ms" => row.std_clock_ms,
        _ => None,
    }
}

/// Two-column `distance_km,<column>` plot data for one curve.
pub fn curve_to_text(header: &FileHeader, curve: &Curve) -> String {
    let mut out = header.comment_lines();
    let _ = writeln!(out, "# curve: {}", curve.name);
    let _ = writeln!(out, "distance_km,{}", curve.column);
    for (d, v) in &curve.points {
        let _ = writeln!(out, "{d},{v}");
    }
    out
}
