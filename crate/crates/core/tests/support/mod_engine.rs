#![allow(dead_code)]

use draftwatch_core::engine::{Engine, LogEntry, PositionRecord, RiderId, RuleConfig};
use draftwatch_core::{Course, Timestamp, UtmFrame, UtmPoint};

use super::naive::{Entry, Naive, NaiveConfig, Report};

pub const COURSE_LENGTH: f64 = 20_000.0;

pub fn straight_course() -> Course {
    let frame = UtmFrame::new(33, true).unwrap();
    Course::build(&[
        UtmPoint::in_frame(frame, 500_000.0, 5_000_000.0, 0.0),
        UtmPoint::in_frame(frame, 500_000.0 + COURSE_LENGTH, 5_000_000.0, 0.0),
    ])
    .unwrap()
}

pub fn to_entry(e: &LogEntry) -> Entry {
    let v = &e.violation;
    (
        e.kind.as_str(),
        e.tick.millis(),
        v.offender.0,
        v.victim.0,
        v.zone_entry_t.millis(),
        v.start_t.millis(),
        v.end_t.map(|t| t.millis()),
        v.start_l.to_bits(),
        v.end_l.map(f64::to_bits),
        v.close_reason.map(|r| r.as_str()),
    )
}

/// Drives the engine with every report in time order, then finishes.
pub fn run_engine(ticks: &[Vec<Report>], cfg: RuleConfig) -> Engine {
    let mut e = Engine::new(straight_course(), cfg).unwrap();
    for r in ticks.iter().flatten() {
        e.register(RiderId(r.rider));
        let rec = PositionRecord {
            rider: RiderId(r.rider),
            x: 500_000.0 + r.l,
            y: 5_000_000.0,
            z: 0.0,
            t: Timestamp(r.t_ms),
            l: r.l,
        };
        e.apply_record(rec, r.lateral).unwrap();
    }
    e.finish();
    e
}

pub fn run_naive(ticks: &[Vec<Report>], cfg: RuleConfig) -> Vec<Entry> {
    let tick_ms = (cfg.tick * 1000.0).round() as i64;
    let mut n = Naive::new(NaiveConfig {
        draft_gap: cfg.draft_gap,
        halfwidth: cfg.zone_halfwidth,
        grace_ms: (cfg.grace * 1000.0).round() as i64,
        tick_ms,
        stale_ms: (cfg.stale_after * 1000.0).round() as i64,
        total: COURSE_LENGTH,
    });
    // Regroup by tick index so tick length need not match the generator.
    let all: Vec<Report> = ticks.iter().flatten().copied().collect();
    let Some(first) = all.first() else { return Vec::new() };
    let k0 = first.t_ms.div_euclid(tick_ms);
    let k1 = all.last().unwrap().t_ms.div_euclid(tick_ms);
    for k in k0..=k1 {
        let batch: Vec<Report> = all.iter().filter(|r| r.t_ms.div_euclid(tick_ms) == k).copied().collect();
        n.tick(k, &batch);
    }
    n.finish();
    n.log
}

pub fn sorted(mut v: Vec<Entry>) -> Vec<Entry> {
    v.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    v
}
