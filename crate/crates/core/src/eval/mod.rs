//! Labeled benchmark series and detection scoring.
//!
//! Intervals here are 1-based and inclusive, like the ones written to disk
//! and reported by the CLI.

mod generate;
mod pool;
mod protocol;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DiscordError, Result};
use crate::stats::TimeSeries;

pub use generate::{generate_bump_series, generate_concat_series, random_walk, BumpParams};
pub use pool::{Instance, InstancePool};
pub use protocol::{run_concat_protocol, ProtocolRun, ProtocolSummary};

/// Inclusive 1-based interval of sample positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Interval covering the window that starts at 0-based `start`.
    pub fn from_window(start: usize, len: usize) -> Self {
        Self {
            start: start + 1,
            end: start + len,
        }
    }

    pub fn len(&self) -> usize {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intersection_len(&self, other: &Interval) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if hi < lo {
            0
        } else {
            hi - lo + 1
        }
    }
}

/// `|detected ∩ truth| / |detected|`.
///
/// Not symmetric: a short detection inside a long truth interval scores 1,
/// while the reverse does not.
pub fn overlapping_rate(detected: Interval, truth: Interval) -> Result<f64> {
    if detected.is_empty() || detected.start == 0 {
        return Err(DiscordError::Metric(format!(
            "detected interval [{}, {}] is empty or not 1-based",
            detected.start, detected.end
        )));
    }
    Ok(detected.intersection_len(&truth) as f64 / detected.len() as f64)
}

/// Sidecar record written next to a generated series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub generator: String,
    pub seed: u64,
    pub length: usize,
    /// Planted anomaly; absent for series without one (random walks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Interval>,
    /// Set when the planted anomaly has zero magnitude.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// A generated series with the location of its planted anomaly.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub series: TimeSeries,
    pub truth: Interval,
    pub metadata: SeriesMetadata,
}

impl LabeledSeries {
    pub fn csv_path(dir: &Path, stem: &str) -> PathBuf {
        dir.join(format!("{stem}.csv"))
    }

    pub fn meta_path(dir: &Path, stem: &str) -> PathBuf {
        dir.join(format!("{stem}.json"))
    }

    /// Write `<stem>.csv` (one value per line) and `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        fs::write(Self::csv_path(dir, stem), values_to_csv(self.series.values()))?;
        let meta = serde_json::to_string_pretty(&self.metadata).map_err(std::io::Error::other)?;
        fs::write(Self::meta_path(dir, stem), meta + "\n")
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let text = fs::read_to_string(Self::csv_path(dir, stem))
            .map_err(|e| DiscordError::Parse(format!("{}: {e}", Self::csv_path(dir, stem).display())))?;
        let series = parse_series(&text)?;
        let metadata = read_metadata(&Self::meta_path(dir, stem))?;
        let truth = metadata
            .truth
            .ok_or_else(|| DiscordError::Parse(format!("{stem}: metadata has no truth interval")))?;
        Ok(Self {
            series,
            truth,
            metadata,
        })
    }
}

pub fn read_metadata(path: &Path) -> Result<SeriesMetadata> {
    let text = fs::read_to_string(path).map_err(|e| DiscordError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| DiscordError::Parse(format!("{}: {e}", path.display())))
}

pub fn values_to_csv(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 12);
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

/// Single-column CSV: one real value per line. Blank lines and a
/// non-numeric first line (header) are skipped.
pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let field = line.trim().trim_end_matches(',').trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(DiscordError::Parse(format!(
                    "line {}: '{field}' is not a number",
                    lineno + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(DiscordError::Parse("no values found".into()));
    }
    TimeSeries::new(values)
}
