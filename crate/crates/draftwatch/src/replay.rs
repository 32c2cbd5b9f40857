//! Paced delivery of recorded fixes to a sink, in global timestamp order.

use std::thread;
use std::time::{Duration, Instant};

use draftwatch_core::{Engine, GeodeticFix, RiderId, Timestamp};
use thiserror::Error;

use crate::track::Track;

/// Receives fixes from a replay. A rejection is recorded by the replay and
/// does not stop it.
pub trait Sink {
    fn deliver(&mut self, rider: RiderId, fix: &GeodeticFix) -> Result<(), String>;
}

/// Feeds an in-process engine, registering riders on first sight.
#[derive(Debug)]
pub struct EngineSink {
    pub engine: Engine,
}

impl EngineSink {
    pub fn new(engine: Engine) -> Self {
        EngineSink { engine }
    }
}

impl Sink for EngineSink {
    fn deliver(&mut self, rider: RiderId, fix: &GeodeticFix) -> Result<(), String> {
        self.engine.register(rider);
        self.engine.ingest_fix(rider, fix).map(|_| ()).map_err(|e| e.to_string())
    }
}

impl<F: FnMut(RiderId, &GeodeticFix) -> Result<(), String>> Sink for F {
    fn deliver(&mut self, rider: RiderId, fix: &GeodeticFix) -> Result<(), String> {
        self(rider, fix)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("track {0} has no rider number")]
    MissingRider(usize),
    #[error("speedup must be at least 1, got {0}")]
    InvalidSpeedup(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub rider: RiderId,
    pub t: Timestamp,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub delivered: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
    /// Earliest fix time; wall offsets are measured from here.
    pub epoch: Option<Timestamp>,
    pub wall: Duration,
    /// Largest delay of a delivery past its scheduled wall-clock offset.
    pub max_lateness: Duration,
    /// Wall-clock offset of each rider's first delivery.
    pub first_delivery: Vec<(RiderId, Duration)>,
}

/// One scheduled delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub rider: RiderId,
    pub fix: GeodeticFix,
}

/// Merges tracks into delivery order: by time, then rider number.
pub fn schedule(tracks: &[Track]) -> Result<Vec<Delivery>, ReplayError> {
    let mut out = Vec::with_capacity(tracks.iter().map(|t| t.samples.len()).sum());
    for (i, t) in tracks.iter().enumerate() {
        let rider = t.rider.ok_or(ReplayError::MissingRider(i))?;
        out.extend(t.samples.iter().map(|&fix| Delivery { rider, fix }));
    }
    out.sort_by_key(|d| (d.fix.t, d.rider));
    Ok(out)
}

/// Delivers every fix at `(t - epoch) / speedup` after the call starts. An
/// infinite speedup delivers without pacing.
pub fn replay(tracks: &[Track], speedup: f64, sink: &mut dyn Sink) -> Result<ReplayReport, ReplayError> {
    if speedup.is_nan() || speedup < 1.0 {
        return Err(ReplayError::InvalidSpeedup(speedup));
    }
    let plan = schedule(tracks)?;
    let mut report = ReplayReport { epoch: plan.first().map(|d| d.fix.t), ..ReplayReport::default() };
    let start = Instant::now();
    for d in &plan {
        let offset_ms = (d.fix.t - report.epoch.unwrap_or(d.fix.t)) as f64;
        let due = Duration::from_secs_f64(offset_ms / 1000.0 / speedup);
        let now = start.elapsed();
        if due > now {
            thread::sleep(due - now);
        }
        let at = start.elapsed();
        report.max_lateness = report.max_lateness.max(at.saturating_sub(due));
        if !report.first_delivery.iter().any(|(r, _)| *r == d.rider) {
            report.first_delivery.push((d.rider, at));
        }
        match sink.deliver(d.rider, &d.fix) {
            Ok(()) => report.delivered += 1,
            Err(reason) => {
                report.rejected += 1;
                report.rejections.push(Rejection { rider: d.rider, t: d.fix.t, reason });
            }
        }
    }
    report.wall = start.elapsed();
    Ok(report)
}
