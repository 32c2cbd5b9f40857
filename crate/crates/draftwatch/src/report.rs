//! Post-race reports: a violation table and per-pair gap series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use draftwatch_core::engine::{zone_test, Placement};
use draftwatch_core::{Course, Ellipsoid, LogEntry, RiderId, RuleConfig, Timestamp, ViolationEvent};

use crate::iso;
use crate::track::Track;

/// Final state of one violation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub violation: ViolationEvent,
    /// Race-clock offset of the start, milliseconds.
    pub start_offset_ms: i64,
}

impl ReportRow {
    pub fn duration_s(&self) -> Option<f64> {
        self.violation.end_t.map(|e| (e - self.violation.start_t) as f64 / 1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    /// Seconds on the race clock.
    pub t: f64,
    /// Victim's path length minus the offender's.
    pub gap_m: f64,
    pub offender_in_zone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub offender: RiderId,
    pub victim: RiderId,
    pub points: Vec<GapPoint>,
}

impl PairSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,gap_m,offender_in_zone\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:.3},{}", p.t, p.gap_m, u8::from(p.offender_in_zone));
        }
        out
    }

    pub fn file_name(&self) -> String {
        format!("gap-{}-{}.csv", self.offender.0, self.victim.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub epoch: Option<Timestamp>,
    pub rows: Vec<ReportRow>,
    pub series: Vec<PairSeries>,
    pub warnings: Vec<String>,
}

/// Collapses a log to the last state of each violation, in id order.
pub fn final_states(log: &[LogEntry]) -> Vec<ViolationEvent> {
    let mut by_id = BTreeMap::new();
    for e in log {
        by_id.insert(e.violation.id, e.violation.clone());
    }
    by_id.into_values().collect()
}

/// Builds the violation table only, with race-clock offsets from `epoch`.
pub fn table(log: &[LogEntry], epoch: Option<Timestamp>) -> Vec<ReportRow> {
    let epoch = epoch.or_else(|| log.iter().map(|e| e.violation.zone_entry_t).min()).unwrap_or_default();
    final_states(log).into_iter().map(|v| ReportRow { start_offset_ms: v.start_t - epoch, violation: v }).collect()
}

/// Builds the table and the gap series. Riders named in the log but
/// missing from `tracks` produce a warning and no series.
pub fn build(log: &[LogEntry], course: &Course, tracks: &[Track], rules: &RuleConfig) -> Report {
    let epoch = tracks.iter().filter_map(Track::start).min();
    let mut report = Report { epoch, rows: table(log, epoch), ..Report::default() };

    let mut placed: BTreeMap<RiderId, BTreeMap<Timestamp, Placement>> = BTreeMap::new();
    for t in tracks {
        let Some(rider) = t.rider else { continue };
        let mut hint = None;
        let mut out = BTreeMap::new();
        for s in &t.samples {
            let Ok(p) = course.frame().project(s, &Ellipsoid::WGS84) else { continue };
            if let Ok(pr) = course.project(&p, hint) {
                hint = Some(pr.segment);
                out.insert(s.t, Placement { l: pr.l, lateral: pr.lateral });
            }
        }
        placed.insert(rider, out);
    }

    let mut pairs: Vec<(RiderId, RiderId)> = Vec::new();
    for row in &report.rows {
        let pair = (row.violation.offender, row.violation.victim);
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    let epoch_ms = epoch.unwrap_or_default();
    for (offender, victim) in pairs {
        let (Some(po), Some(pv)) = (placed.get(&offender), placed.get(&victim)) else {
            report.warnings.push(format!("no track for rider {} or {}; gap series skipped", offender, victim));
            continue;
        };
        let points = po
            .iter()
            .filter_map(|(t, o)| {
                let v = pv.get(t)?;
                Some(GapPoint {
                    t: (*t - epoch_ms) as f64 / 1000.0,
                    gap_m: v.l - o.l,
                    offender_in_zone: zone_test(*v, *o, rules),
                })
            })
            .collect();
        report.series.push(PairSeries { offender, victim, points });
    }
    report
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Human-readable table plus per-rider totals.
pub fn render(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", plural(rows.len(), "violation"));
    if !rows.is_empty() {
        let _ = writeln!(
            out,
            "{:>4}  {:<16} {:>8} {:>7} {:>7} {:>10} {:>8}  closed",
            "id", "kind", "offender", "victim", "start", "duration_s", "meters"
        );
    }
    for r in rows {
        let v = &r.violation;
        let _ = writeln!(
            out,
            "{:>4}  {:<16} {:>8} {:>7} {:>7} {:>10} {:>8}  {}",
            v.id,
            v.kind.as_str(),
            v.offender.0,
            v.victim.0,
            iso::race_clock(r.start_offset_ms),
            r.duration_s().map_or("open".into(), |d| format!("{d:.0}")),
            v.distance().map_or("-".into(), |m| format!("{m:.1}")),
            v.close_reason.map_or("-", |c| c.as_str()),
        );
    }
    let mut totals: BTreeMap<RiderId, (usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = totals.entry(r.violation.offender).or_default();
        e.0 += 1;
        e.1 += r.violation.distance().unwrap_or(0.0);
    }
    for (rider, (n, m)) in totals {
        let _ = writeln!(out, "rider {}: {}, {:.1} m", rider.0, plural(n, "violation"), m);
    }
    out
}
