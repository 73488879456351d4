//! UTC timestamps on the 6-hourly synoptic cadence.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use thiserror::Error;

/// All timestamps are naive UTC instants.
pub type Timestamp = NaiveDateTime;

pub const STEP_HOURS: i64 = 6;

#[derive(Debug, Error, PartialEq)]
pub enum TimeError {
    #[error("cannot parse timestamp {0:?}")]
    Parse(String),
    #[error("timestamp {0} is not at 00/06/12/18 UTC")]
    OffSynoptic(String),
}

const ISO_FMT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_iso(t: &Timestamp) -> String {
    t.format(ISO_FMT).to_string()
}

/// Accepts `2020-08-01T06:00:00Z`, the same without `Z`, or with a space
/// separator (the IBTrACS style).
pub fn parse_iso(s: &str) -> Result<Timestamp, TimeError> {
    let s = s.trim();
    let body = s.strip_suffix('Z').unwrap_or(s);
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(body, fmt) {
            return Ok(t);
        }
    }
    Err(TimeError::Parse(s.to_string()))
}

pub fn ymdh(year: i32, month: u32, day: u32, hour: u32) -> Timestamp {
    NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(hour, 0, 0))
        .expect("valid calendar date")
}

pub fn is_synoptic(t: &Timestamp) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0 && t.hour().is_multiple_of(6)
}

pub fn check_synoptic(t: &Timestamp) -> Result<(), TimeError> {
    if is_synoptic(t) {
        Ok(())
    } else {
        Err(TimeError::OffSynoptic(format_iso(t)))
    }
}

pub fn step() -> Duration {
    Duration::hours(STEP_HOURS)
}

/// Number of whole 6 h steps from `a` to `b`, or `None` when the gap is not
/// a multiple of 6 h.
pub fn steps_between(a: &Timestamp, b: &Timestamp) -> Option<i64> {
    let secs = (*b - *a).num_seconds();
    let step = STEP_HOURS * 3600;
    (secs % step == 0).then_some(secs / step)
}

pub fn year_month(t: &Timestamp) -> (i32, u32) {
    (t.year(), t.month())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip() {
        let t = ymdh(1995, 8, 15, 6);
        assert_eq!(format_iso(&t), "1995-08-15T06:00:00Z");
        assert_eq!(parse_iso("1995-08-15T06:00:00Z").unwrap(), t);
        assert_eq!(parse_iso("1995-08-15 06:00:00").unwrap(), t);
        assert!(parse_iso("15/08/1995").is_err());
    }

    #[test]
    fn synoptic_hours() {
        assert!(is_synoptic(&ymdh(2000, 1, 1, 18)));
        assert!(!is_synoptic(&ymdh(2000, 1, 1, 3)));
        assert_eq!(steps_between(&ymdh(2000, 1, 1, 0), &ymdh(2000, 1, 2, 0)), Some(4));
        assert_eq!(steps_between(&ymdh(2000, 1, 1, 0), &ymdh(2000, 1, 1, 3)), None);
    }
}
