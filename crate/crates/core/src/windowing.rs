//! Slicing a stream into time windows.
//!
//! Windows are half-open `[start, end)`. Each window also carries the range
//! of stream records it covers, which is the authoritative membership for
//! relations-count windows.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TemporalEventStream;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("window spec produced no windows")]
    NoWindows,
    #[error("offset fraction is only defined for overlapping windows")]
    NotOverlapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowType {
    Disjoint,
    Overlapping,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Division {
    #[default]
    Timestamp,
    RelationsCount,
    Arbitrary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_type: WindowType,
    #[serde(default)]
    pub division: Division,
    /// Seconds for timestamp division, records for relations-count division.
    pub size: u64,
    /// Step between overlapping window starts, same unit as `size`.
    #[serde(default)]
    pub offset: Option<u64>,
    /// Window boundaries for arbitrary division.
    #[serde(default)]
    pub boundaries: Option<Vec<i64>>,
}

impl WindowSpec {
    pub fn disjoint(size: u64) -> Self {
        Self {
            window_type: WindowType::Disjoint,
            division: Division::Timestamp,
            size,
            offset: None,
            boundaries: None,
        }
    }

    pub fn overlapping(size: u64, offset: u64) -> Self {
        Self {
            window_type: WindowType::Overlapping,
            offset: Some(offset),
            ..Self::disjoint(size)
        }
    }

    pub fn increasing(size: u64) -> Self {
        Self {
            window_type: WindowType::Increasing,
            ..Self::disjoint(size)
        }
    }

    pub fn arbitrary(window_type: WindowType, boundaries: Vec<i64>) -> Self {
        Self {
            window_type,
            division: Division::Arbitrary,
            size: 1,
            offset: None,
            boundaries: Some(boundaries),
        }
    }

    pub fn with_division(mut self, division: Division) -> Self {
        self.division = division;
        self
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        let invalid = |msg: &str| Err(WindowError::InvalidSpec(msg.to_owned()));
        if self.division == Division::Arbitrary {
            let Some(b) = &self.boundaries else {
                return invalid("arbitrary division needs explicit boundaries");
            };
            if b.len() < 2 {
                return invalid("arbitrary division needs at least two boundaries");
            }
            if b.windows(2).any(|w| w[0] >= w[1]) {
                return invalid("boundaries must be strictly increasing");
            }
            if self.window_type == WindowType::Overlapping {
                return invalid("overlapping windows cannot use arbitrary division");
            }
            return Ok(());
        }
        if self.size == 0 {
            return invalid("window size must be positive");
        }
        match (self.window_type, self.offset) {
            (WindowType::Overlapping, None) => invalid("overlapping windows need an offset"),
            (WindowType::Overlapping, Some(o)) if o == 0 || o >= self.size => {
                invalid("offset must satisfy 0 < offset < size")
            }
            (WindowType::Increasing, _) if self.division == Division::RelationsCount => {
                invalid("increasing windows only support timestamp division")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    pub records: Range<usize>,
}

impl TimeWindow {
    pub fn record_count(&self) -> usize {
        self.records.len()
    }
}

/// JSON row of the windows index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowIndexEntry {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    pub record_count: usize,
}

impl From<&TimeWindow> for WindowIndexEntry {
    fn from(w: &TimeWindow) -> Self {
        Self {
            index: w.index,
            start: w.start,
            end: w.end,
            record_count: w.record_count(),
        }
    }
}

pub fn make_windows(stream: &TemporalEventStream, spec: &WindowSpec) -> Result<Vec<TimeWindow>, WindowError> {
    spec.validate()?;
    let timestamps: Vec<i64> = stream.records().iter().map(|r| r.timestamp).collect();
    let intervals = match spec.division {
        Division::Timestamp => time_intervals(stream.span(), spec),
        Division::Arbitrary => arbitrary_intervals(spec),
        Division::RelationsCount => {
            let windows = count_windows(&timestamps, spec);
            return if windows.is_empty() {
                Err(WindowError::NoWindows)
            } else {
                Ok(windows)
            };
        }
    };
    let windows: Vec<TimeWindow> = intervals
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| TimeWindow {
            index,
            start,
            end,
            records: timestamps.partition_point(|&t| t < start)..timestamps.partition_point(|&t| t < end),
        })
        .collect();
    if windows.iter().all(|w| w.records.is_empty()) {
        return Err(WindowError::NoWindows);
    }
    Ok(windows)
}

/// Start offsets `0, step, 2*step, ...` of windows of length `size` over
/// `extent` units. Windows that fit entirely are always produced; one
/// trailing partial window is added only when the full windows leave
/// trailing units uncovered.
fn window_starts(extent: u64, size: u64, step: u64) -> Vec<u64> {
    let mut starts = Vec::new();
    let mut start = 0u64;
    while start + size <= extent {
        starts.push(start);
        start += step;
    }
    let covered = starts.last().map_or(0, |&s| s + size);
    if covered < extent {
        starts.push(start);
    }
    starts
}

fn time_intervals((t_min, t_max): (i64, i64), spec: &WindowSpec) -> Vec<(i64, i64)> {
    let extent = (t_max - t_min) as u64 + 1;
    let size = spec.size;
    match spec.window_type {
        WindowType::Disjoint => window_starts(extent, size, size)
            .into_iter()
            .map(|s| (t_min + s as i64, t_min + (s + size) as i64))
            .collect(),
        WindowType::Overlapping => window_starts(extent, size, spec.offset.unwrap_or(size))
            .into_iter()
            .map(|s| (t_min + s as i64, t_min + (s + size) as i64))
            .collect(),
        WindowType::Increasing => {
            let count = extent.div_ceil(size);
            (1..=count).map(|k| (t_min, t_min + (k * size) as i64)).collect()
        }
    }
}

fn arbitrary_intervals(spec: &WindowSpec) -> Vec<(i64, i64)> {
    let b = spec.boundaries.as_deref().unwrap_or_default();
    match spec.window_type {
        WindowType::Increasing => b[1..].iter().map(|&e| (b[0], e)).collect(),
        _ => b.windows(2).map(|w| (w[0], w[1])).collect(),
    }
}

fn count_windows(timestamps: &[i64], spec: &WindowSpec) -> Vec<TimeWindow> {
    let n = timestamps.len() as u64;
    let step = match spec.window_type {
        WindowType::Overlapping => spec.offset.unwrap_or(spec.size),
        _ => spec.size,
    };
    window_starts(n, spec.size, step)
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            let lo = s as usize;
            let hi = (s + spec.size).min(n) as usize;
            TimeWindow {
                index,
                start: timestamps[lo],
                end: timestamps[hi - 1] + 1,
                records: lo..hi,
            }
        })
        .collect()
}

/// `offset / size` for overlapping specs.
pub fn offset_fraction(spec: &WindowSpec) -> Result<f64, WindowError> {
    if spec.window_type != WindowType::Overlapping {
        return Err(WindowError::NotOverlapping);
    }
    spec.validate()?;
    Ok(spec.offset.unwrap_or_default() as f64 / spec.size as f64)
}

/// Whether an overlapping spec's offset lies in the commonly used 30-50% band.
pub fn offset_in_recommended_band(fraction: f64) -> bool {
    (0.3..=0.5).contains(&fraction)
}
