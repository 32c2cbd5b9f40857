//! JSON shapes shared by the HTTP service, the replay client and the
//! event log files.

use draftwatch_core::{
    CloseReason, EventKind, GeodeticFix, LogEntry, RiderId, StandingRow, ViolationEvent, ViolationKind,
};
use serde::{Deserialize, Serialize};

use crate::iso;
use crate::settings::RaceSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBody {
    pub rider: u32,
    pub t: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub alt: f64,
}

impl PositionBody {
    pub fn new(rider: RiderId, fix: &GeodeticFix) -> Self {
        PositionBody { rider: rider.0, t: iso::format(fix.t), lat: fix.lat, lon: fix.lon, alt: fix.alt }
    }

    pub fn fix(&self) -> Option<GeodeticFix> {
        Some(GeodeticFix::new(self.lat, self.lon, self.alt, iso::parse(&self.t)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationBody {
    pub id: u64,
    pub kind: String,
    pub offender: u32,
    pub victim: u32,
    pub zone_entry_t: String,
    pub start_t: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_t: Option<String>,
    pub start_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_l: Option<f64>,
    pub open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub close_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommended_penalty_s: Option<u32>,
}

impl From<&ViolationEvent> for ViolationBody {
    fn from(v: &ViolationEvent) -> Self {
        ViolationBody {
            id: v.id,
            kind: v.kind.as_str().to_string(),
            offender: v.offender.0,
            victim: v.victim.0,
            zone_entry_t: iso::format(v.zone_entry_t),
            start_t: iso::format(v.start_t),
            end_t: v.end_t.map(iso::format),
            start_l: v.start_l,
            end_l: v.end_l,
            open: v.is_open(),
            close_reason: v.close_reason.map(|c| c.as_str().to_string()),
            recommended_penalty_s: v.recommended_penalty_secs,
        }
    }
}

impl ViolationBody {
    pub fn to_event(&self) -> Option<ViolationEvent> {
        Some(ViolationEvent {
            id: self.id,
            kind: ViolationKind::parse(&self.kind)?,
            offender: RiderId(self.offender),
            victim: RiderId(self.victim),
            zone_entry_t: iso::parse(&self.zone_entry_t)?,
            start_t: iso::parse(&self.start_t)?,
            end_t: match &self.end_t {
                Some(s) => Some(iso::parse(s)?),
                None => None,
            },
            start_l: self.start_l,
            end_l: self.end_l,
            close_reason: match &self.close_reason {
                Some(s) => Some(CloseReason::parse(s)?),
                None => None,
            },
            recommended_penalty_secs: self.recommended_penalty_s,
        })
    }
}

/// One line of an event log or event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    pub event: String,
    pub tick: String,
    pub violation: ViolationBody,
}

impl From<&LogEntry> for LogLine {
    fn from(e: &LogEntry) -> Self {
        LogLine {
            seq: e.seq,
            event: e.kind.as_str().to_string(),
            tick: iso::format(e.tick),
            violation: ViolationBody::from(&e.violation),
        }
    }
}

impl LogLine {
    pub fn to_entry(&self) -> Option<LogEntry> {
        Some(LogEntry {
            seq: self.seq,
            tick: iso::parse(&self.tick)?,
            kind: EventKind::parse(&self.event)?,
            violation: self.violation.to_event()?,
        })
    }

    /// The line as it appears in a log file, without the trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log line serializes")
    }
}

/// Serializes entries as newline-delimited JSON.
pub fn encode_log(entries: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&LogLine::from(e).to_json());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

/// Reads a newline-delimited event log. Blank lines are skipped.
pub fn decode_log(text: &str) -> Result<Vec<LogEntry>, LogParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| LogParseError { line: i + 1, message };
        let line: LogLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        out.push(line.to_entry().ok_or_else(|| err("unknown kind, reason or time".into()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingBody {
    pub rank: usize,
    pub rider: u32,
    pub l: f64,
    pub gap_to_ahead: Option<f64>,
    pub stale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_t: Option<String>,
}

impl From<&StandingRow> for StandingBody {
    fn from(r: &StandingRow) -> Self {
        StandingBody {
            rank: r.rank,
            rider: r.rider.0,
            l: r.l,
            gap_to_ahead: r.gap_to_ahead,
            stale: r.stale,
            finish_t: r.finish_t.map(iso::format),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingsBody {
    /// Last evaluated tick.
    pub tick: Option<String>,
    pub standings: Vec<StandingBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRace {
    #[serde(default)]
    pub name: Option<String>,
    /// Course survey in any accepted track format.
    pub course: String,
    #[serde(default)]
    pub settings: Option<RaceSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceCreated {
    pub id: u64,
    pub name: Option<String>,
    pub course_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accepted {
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_accepted_t: Option<String>,
}
