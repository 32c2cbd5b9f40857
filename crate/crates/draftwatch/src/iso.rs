//! ISO-8601 timestamps on the wire and in track files.

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use draftwatch_core::Timestamp;

/// Formats as RFC 3339 in UTC, with milliseconds only when non-zero.
pub fn format(t: Timestamp) -> String {
    match Utc.timestamp_millis_opt(t.millis()).single() {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        None => t.millis().to_string(),
    }
}

/// Parses an ISO-8601 time. Offsets are normalised to UTC; a time with no
/// offset is read as UTC. Precision below 1 ms is truncated.
pub fn parse(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp(dt.timestamp_millis()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(n.and_utc().timestamp_millis()));
        }
    }
    None
}

/// `mm:ss` on a race clock; negative offsets get a leading minus.
pub fn race_clock(offset_ms: i64) -> String {
    let sign = if offset_ms < 0 { "-" } else { "" };
    let s = offset_ms.unsigned_abs() / 1000;
    format!("{sign}{}:{:02}", s / 60, s % 60)
}
