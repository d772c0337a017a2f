//! Events, streams, and sensor parameters.

mod io;

pub use io::{
    load_csv, load_stream, read_csv, read_stream, save_csv, save_stream, write_csv, write_stream,
    HEADER_LEN, MAGIC, RECORD_LEN, VERSION,
};

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    /// Only valid inside streams whose mode is [`PolarityMode::None`].
    None,
}

impl Polarity {
    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
            Polarity::None => 0,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            0 => Some(Polarity::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarityMode {
    Signed,
    None,
}

impl PolarityMode {
    fn admits(self, p: Polarity) -> bool {
        match self {
            PolarityMode::Signed => p != Polarity::None,
            PolarityMode::None => p == Polarity::None,
        }
    }
}

/// A single sensor event: pixel column `x`, row `y`, timestamp `t` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, polarity: Polarity) -> Self {
        Self { x, y, t, polarity }
    }
}

/// An ordered event sequence from a `width` x `height` sensor.
///
/// The fields are public so that malformed streams can be built and checked
/// with [`EventStream::validate`]; every operation that needs a valid stream
/// says so.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub polarity_mode: PolarityMode,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NonMonotoneTimestamp { index: usize },
    OutOfBounds { index: usize },
    PolarityMismatch { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonMonotoneTimestamp { index } => {
                write!(f, "non-monotone timestamp at index {index}")
            }
            Violation::OutOfBounds { index } => write!(f, "out of bounds at index {index}"),
            Violation::PolarityMismatch { index } => {
                write!(f, "polarity inconsistent with stream mode at index {index}")
            }
        }
    }
}

/// Outcome of [`EventStream::validate`]. Empty means the stream is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl EventStream {
    pub fn new(width: u16, height: u16, polarity_mode: PolarityMode) -> Self {
        Self { width, height, polarity_mode, events: Vec::new() }
    }

    pub fn with_events(
        width: u16,
        height: u16,
        polarity_mode: PolarityMode,
        events: Vec<Event>,
    ) -> Self {
        Self { width, height, polarity_mode, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Reports the first offending index for each invariant that fails.
    pub fn validate(&self) -> ValidationReport {
        let mut non_monotone = None;
        let mut out_of_bounds = None;
        let mut mismatch = None;
        for (i, e) in self.events.iter().enumerate() {
            if non_monotone.is_none() && i > 0 && e.t < self.events[i - 1].t {
                non_monotone = Some(i);
            }
            if out_of_bounds.is_none() && (e.x >= self.width || e.y >= self.height) {
                out_of_bounds = Some(i);
            }
            if mismatch.is_none() && !self.polarity_mode.admits(e.polarity) {
                mismatch = Some(i);
            }
            if non_monotone.is_some() && out_of_bounds.is_some() && mismatch.is_some() {
                break;
            }
        }
        let mut violations = Vec::new();
        if let Some(index) = non_monotone {
            violations.push(Violation::NonMonotoneTimestamp { index });
        }
        if let Some(index) = out_of_bounds {
            violations.push(Violation::OutOfBounds { index });
        }
        if let Some(index) = mismatch {
            violations.push(Violation::PolarityMismatch { index });
        }
        ValidationReport { violations }
    }

    fn with_same_geometry(&self, events: Vec<Event>) -> EventStream {
        EventStream { width: self.width, height: self.height, polarity_mode: self.polarity_mode, events }
    }

    /// Events with `t0 <= t < t1`. The stream must be time-sorted.
    pub fn slice_by_time(&self, t0: u64, t1: u64) -> Result<EventStream> {
        if t0 > t1 {
            return Err(Error::InvalidInterval { t0, t1 });
        }
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = self.events.partition_point(|e| e.t < t1);
        Ok(self.with_same_geometry(self.events[lo..hi.max(lo)].to_vec()))
    }

    /// Exactly `n` consecutive events starting at `start`.
    pub fn slice_by_count(&self, start: usize, n: usize) -> Result<EventStream> {
        let len = self.events.len();
        match start.checked_add(n) {
            Some(end) if end <= len => Ok(self.with_same_geometry(self.events[start..end].to_vec())),
            _ => Err(Error::SliceOutOfRange { start, n, len }),
        }
    }

    /// Time span `[first.t, last.t]`, if any events exist.
    pub fn time_range(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }
}

/// Contrast-threshold sensor parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Log-intensity change needed for one event.
    pub contrast_threshold: f64,
    /// Standard deviation of the per-pixel threshold jitter.
    pub threshold_sigma: f64,
    /// Background events per pixel per second.
    pub background_rate: f64,
    /// Added to intensities in `[0, 1]` before taking the logarithm.
    pub log_epsilon: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { contrast_threshold: 0.2, threshold_sigma: 0.0, background_rate: 0.0, log_epsilon: 1e-3 }
    }
}

impl SensorModel {
    pub fn ideal(contrast_threshold: f64) -> Self {
        Self { contrast_threshold, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.contrast_threshold > 0.0
            && self.threshold_sigma >= 0.0
            && self.background_rate >= 0.0
            && self.log_epsilon > 0.0
            && [self.contrast_threshold, self.threshold_sigma, self.background_rate, self.log_epsilon]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid sensor model {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_at(times: &[u64]) -> EventStream {
        let events = times.iter().map(|&t| Event::new(1, 1, t, Polarity::Positive)).collect();
        EventStream::with_events(64, 64, PolarityMode::Signed, events)
    }

    #[test]
    fn empty_stream_is_valid() {
        assert!(EventStream::new(64, 64, PolarityMode::Signed).validate().is_ok());
    }

    #[test]
    fn reports_non_monotone_timestamp() {
        let report = stream_at(&[10, 5]).validate();
        assert_eq!(report.violations, vec![Violation::NonMonotoneTimestamp { index: 1 }]);
        assert_eq!(report.violations[0].to_string(), "non-monotone timestamp at index 1");
    }

    #[test]
    fn reports_out_of_bounds() {
        let s = EventStream::with_events(
            64,
            64,
            PolarityMode::Signed,
            vec![Event::new(64, 0, 0, Polarity::Positive)],
        );
        let report = s.validate();
        assert_eq!(report.violations, vec![Violation::OutOfBounds { index: 0 }]);
        assert_eq!(report.violations[0].to_string(), "out of bounds at index 0");
    }

    #[test]
    fn reports_polarity_mode_mismatch() {
        let mut s = stream_at(&[1, 2]);
        s.events[1].polarity = Polarity::None;
        assert_eq!(s.validate().violations, vec![Violation::PolarityMismatch { index: 1 }]);
        s.polarity_mode = PolarityMode::None;
        assert_eq!(s.validate().violations, vec![Violation::PolarityMismatch { index: 0 }]);
    }

    #[test]
    fn reports_first_index_per_rule() {
        let mut s = stream_at(&[10, 5, 3, 4]);
        s.events[2].x = 70;
        s.events[3].x = 80;
        assert_eq!(
            s.validate().violations,
            vec![Violation::NonMonotoneTimestamp { index: 1 }, Violation::OutOfBounds { index: 2 }]
        );
    }

    #[test]
    fn time_slice_is_half_open() {
        let s = stream_at(&[0, 5, 10]);
        let ts: Vec<u64> = s.slice_by_time(0, 10).unwrap().events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0, 5]);
        assert!(s.slice_by_time(20, 30).unwrap().is_empty());
        assert!(s.slice_by_time(5, 5).unwrap().is_empty());
        assert!(matches!(s.slice_by_time(6, 5), Err(Error::InvalidInterval { t0: 6, t1: 5 })));
    }

    #[test]
    fn count_slice_bounds() {
        let s = stream_at(&(0..15_000).collect::<Vec<_>>());
        let first = s.slice_by_count(0, 7_500).unwrap();
        assert_eq!(first.len(), 7_500);
        assert_eq!(first.events[..], s.events[..7_500]);
        assert!(s.slice_by_count(3, 0).unwrap().is_empty());
        assert!(s.slice_by_count(15_000, 0).unwrap().is_empty());
        assert!(matches!(s.slice_by_count(7_501, 7_500), Err(Error::SliceOutOfRange { .. })));
        assert!(s.slice_by_count(usize::MAX, 2).is_err());
    }

    #[test]
    fn sensor_model_checks() {
        assert!(SensorModel::default().validate().is_ok());
        assert!(SensorModel::ideal(0.0).validate().is_err());
        assert!(SensorModel { log_epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(SensorModel { threshold_sigma: -1.0, ..Default::default() }.validate().is_err());
    }
}
