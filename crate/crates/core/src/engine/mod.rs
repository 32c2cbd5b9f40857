//! Live race state and the drafting rule state machine.
//!
//! Fixes are bucketed into ticks of `RuleConfig::tick` seconds. A tick is
//! evaluated once the first record of a later tick arrives (or on
//! [`Engine::advance_to`] / [`Engine::finish`]): standings are re-sorted,
//! overtakes and drop-back obligations are resolved, then every adjacent
//! pair of active riders is tested against the drafting zone.

mod rules;
mod standings;

use alloc::collections::{btree_map, BTreeMap};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::course::{Course, CourseError};
use crate::geodesy::{Ellipsoid, GeoError, GeodeticFix, UtmPoint};
use crate::time::Timestamp;

pub use rules::{zone_test, Placement, RuleConfig};
pub use standings::{RankKey, Standings};

/// Recommended time penalty for one drafting episode.
pub const DRAFTING_PENALTY_SECS: u32 = 300;
const FINISH_EPSILON: f64 = 1e-6;

/// Start number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RiderId(pub u32);

impl fmt::Display for RiderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The engine's per-rider record: start number, UTM position, time and
/// path length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionRecord {
    pub rider: RiderId,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: Timestamp,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Drafting,
    DropbackBreach,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Drafting => "drafting",
            ViolationKind::DropbackBreach => "dropback_breach",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "drafting" => Some(ViolationKind::Drafting),
            "dropback_breach" => Some(ViolationKind::DropbackBreach),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CloseReason {
    LeftZone,
    Overtook,
    LeaderChanged,
    Stale,
    RaceEnd,
}

impl CloseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CloseReason::LeftZone => "left_zone",
            CloseReason::Overtook => "overtook",
            CloseReason::LeaderChanged => "leader_changed",
            CloseReason::Stale => "stale",
            CloseReason::RaceEnd => "race_end",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "left_zone" => CloseReason::LeftZone,
            "overtook" => CloseReason::Overtook,
            "leader_changed" => CloseReason::LeaderChanged,
            "stale" => CloseReason::Stale,
            "race_end" => CloseReason::RaceEnd,
            _ => return None,
        })
    }
}

/// One drafting episode, or a drop-back breach (which is instantaneous).
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationEvent {
    pub id: u64,
    pub kind: ViolationKind,
    pub offender: RiderId,
    /// The rider ahead.
    pub victim: RiderId,
    pub zone_entry_t: Timestamp,
    pub start_t: Timestamp,
    pub end_t: Option<Timestamp>,
    pub start_l: f64,
    pub end_l: Option<f64>,
    pub close_reason: Option<CloseReason>,
    pub recommended_penalty_secs: Option<u32>,
}

impl ViolationEvent {
    pub fn is_open(&self) -> bool {
        self.end_t.is_none()
    }

    /// Metres ridden by the offender during the episode.
    pub fn distance(&self) -> Option<f64> {
        self.end_l.map(|e| e - self.start_l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ViolationOpened,
    ViolationClosed,
    DropbackBreach,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ViolationOpened => "violation_opened",
            EventKind::ViolationClosed => "violation_closed",
            EventKind::DropbackBreach => "dropback_breach",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "violation_opened" => EventKind::ViolationOpened,
            "violation_closed" => EventKind::ViolationClosed,
            "dropback_breach" => EventKind::DropbackBreach,
            _ => return None,
        })
    }
}

/// An entry of the append-only event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// Strictly increasing per race, starting at 1.
    pub seq: u64,
    /// Tick at which the engine emitted the entry.
    pub tick: Timestamp,
    pub kind: EventKind,
    /// State of the violation as of this entry.
    pub violation: ViolationEvent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("rider {0} is not registered")]
    UnknownRider(RiderId),
    #[error("rider {rider}: timestamp {got} does not follow last accepted {last}")]
    TimestampRegression { rider: RiderId, last: Timestamp, got: Timestamp },
    #[error("invalid rule config: {0}")]
    InvalidConfig(&'static str),
    #[error("race already finished")]
    Finished,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Course(#[from] CourseError),
}

/// What happened to one ingested fix.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    /// Log entries produced by ticks that closed before this fix.
    pub events: Vec<LogEntry>,
    /// False when the fix fell outside the course corridor; the rider is
    /// then treated as stale until it returns.
    pub on_course: bool,
}

/// One row of a standings snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct StandingRow {
    pub rank: usize,
    pub rider: RiderId,
    pub l: f64,
    /// Path-length lead of the rider ranked directly ahead.
    pub gap_to_ahead: Option<f64>,
    pub stale: bool,
    pub finish_t: Option<Timestamp>,
}

#[derive(Debug, Clone, Default)]
struct RiderState {
    record: Option<PositionRecord>,
    prev_record: Option<PositionRecord>,
    lateral: f64,
    last_t: Option<Timestamp>,
    off_course: bool,
    hint: Option<usize>,
    finish_t: Option<Timestamp>,
    stale_since: Option<Timestamp>,
    /// Leader whose zone this rider is in, and the tick it entered.
    zone_entry: Option<(RiderId, Timestamp)>,
    open_violation: Option<u64>,
    /// Rider this one must drop 7 m behind before passing again.
    last_overtaken_by: Option<RiderId>,
    prev_leader: Option<RiderId>,
    // Evaluated at the current tick.
    active: bool,
    placement: Placement,
}

/// Race state for one race. All mutation goes through `&mut self`, so a
/// race has a single logical writer.
#[derive(Debug, Clone)]
pub struct Engine {
    course: Course,
    ellipsoid: Ellipsoid,
    cfg: RuleConfig,
    riders: BTreeMap<RiderId, RiderState>,
    standings: Standings,
    /// Earliest tick index not yet evaluated.
    pending_tick: Option<i64>,
    last_evaluated: Option<Timestamp>,
    violations: Vec<ViolationEvent>,
    log: Vec<LogEntry>,
    last_exchanges: usize,
    finished: bool,
}

impl Engine {
    pub fn new(course: Course, cfg: RuleConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        Ok(Engine {
            course,
            ellipsoid: Ellipsoid::WGS84,
            cfg,
            riders: BTreeMap::new(),
            standings: Standings::new(),
            pending_tick: None,
            last_evaluated: None,
            violations: Vec::new(),
            log: Vec::new(),
            last_exchanges: 0,
            finished: false,
        })
    }

    pub fn course(&self) -> &Course {
        &self.course
    }

    pub fn config(&self) -> &RuleConfig {
        &self.cfg
    }

    pub fn standings(&self) -> &Standings {
        &self.standings
    }

    pub fn violations(&self) -> &[ViolationEvent] {
        &self.violations
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn is_registered(&self, rider: RiderId) -> bool {
        self.riders.contains_key(&rider)
    }

    /// Adjacent exchanges made by the standings re-sort of the last
    /// evaluated tick.
    pub fn last_exchanges(&self) -> usize {
        self.last_exchanges
    }

    pub fn last_evaluated(&self) -> Option<Timestamp> {
        self.last_evaluated
    }

    /// Latest on-course record of a rider.
    pub fn record(&self, rider: RiderId) -> Option<&PositionRecord> {
        self.riders.get(&rider).and_then(|s| s.record.as_ref())
    }

    pub fn last_accepted(&self, rider: RiderId) -> Option<Timestamp> {
        self.riders.get(&rider).and_then(|s| s.last_t)
    }

    /// Registers a start number. Registering twice is a no-op.
    pub fn register(&mut self, rider: RiderId) {
        if let btree_map::Entry::Vacant(slot) = self.riders.entry(rider) {
            slot.insert(RiderState::default());
            self.standings.update(RankKey::new(rider, 0.0));
        }
    }

    /// Projects a raw fix into the course frame and ingests it.
    pub fn ingest_fix(&mut self, rider: RiderId, fix: &GeodeticFix) -> Result<IngestOutcome, EngineError> {
        self.check_order(rider, fix.t)?;
        let p = self.course.frame().project(fix, &self.ellipsoid)?;
        self.ingest_point(rider, fix.t, &p)
    }

    /// Ingests a position already in the course frame.
    pub fn ingest_point(&mut self, rider: RiderId, t: Timestamp, p: &UtmPoint) -> Result<IngestOutcome, EngineError> {
        self.check_order(rider, t)?;
        let hint = self.riders[&rider].hint;
        let projection = match self.course.project(p, hint) {
            Ok(proj) => Some(proj),
            Err(CourseError::OffCourse { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let events = self.advance_to(t);
        let state = self.riders.get_mut(&rider).expect("checked above");
        state.last_t = Some(t);
        let on_course = match projection {
            Some(proj) => {
                let rec = PositionRecord { rider, x: p.east, y: p.north, z: p.alt, t, l: proj.l };
                state.hint = Some(proj.segment);
                Self::store(state, rec, proj.lateral, self.course.total_length());
                true
            }
            None => {
                state.off_course = true;
                false
            }
        };
        Ok(IngestOutcome { events, on_course })
    }

    /// Ingests a record whose path length and lateral offset are already
    /// known. Used by tests and replays that bypass projection.
    pub fn apply_record(&mut self, rec: PositionRecord, lateral: f64) -> Result<IngestOutcome, EngineError> {
        self.check_order(rec.rider, rec.t)?;
        let events = self.advance_to(rec.t);
        let total = self.course.total_length();
        let state = self.riders.get_mut(&rec.rider).expect("checked above");
        state.last_t = Some(rec.t);
        let rec = PositionRecord { l: rec.l.clamp(0.0, total), ..rec };
        Self::store(state, rec, lateral, total);
        Ok(IngestOutcome { events, on_course: true })
    }

    fn check_order(&self, rider: RiderId, t: Timestamp) -> Result<(), EngineError> {
        if self.finished {
            return Err(EngineError::Finished);
        }
        let state = self.riders.get(&rider).ok_or(EngineError::UnknownRider(rider))?;
        if let Some(last) = state.last_t {
            if t <= last {
                return Err(EngineError::TimestampRegression { rider, last, got: t });
            }
        }
        Ok(())
    }

    fn store(state: &mut RiderState, mut rec: PositionRecord, lateral: f64, total: f64) {
        state.off_course = false;
        if state.finish_t.is_none() && rec.l >= total - FINISH_EPSILON {
            state.finish_t = Some(rec.t);
        }
        // Finishers share l = total so arrival time decides their order.
        if state.finish_t.is_some() {
            rec.l = total;
        }
        state.prev_record = state.record.replace(rec);
        state.lateral = lateral;
    }

    fn tick_index(&self, t: Timestamp) -> i64 {
        t.millis().div_euclid(self.cfg.tick_ms())
    }

    /// Evaluates every pending tick that ends before `t`.
    pub fn advance_to(&mut self, t: Timestamp) -> Vec<LogEntry> {
        let target = self.tick_index(t);
        let first_new = self.log.len();
        match self.pending_tick {
            None => self.pending_tick = Some(target),
            Some(mut k) => {
                while k < target {
                    let any_active = self.evaluate(k);
                    k = if any_active { k + 1 } else { target };
                }
                self.pending_tick = Some(k.max(target));
            }
        }
        self.log[first_new..].to_vec()
    }

    /// Evaluates the last pending tick, then closes every open violation.
    /// Further fixes are rejected.
    pub fn finish(&mut self) -> Vec<LogEntry> {
        let first_new = self.log.len();
        if self.finished {
            return Vec::new();
        }
        if let Some(k) = self.pending_tick {
            self.evaluate(k);
        }
        let t = self.last_evaluated.unwrap_or_default();
        let ids: Vec<RiderId> = self.standings.riders().collect();
        for id in ids {
            self.close_open(id, t, CloseReason::RaceEnd);
            if let Some(s) = self.riders.get_mut(&id) {
                s.zone_entry = None;
            }
        }
        self.finished = true;
        self.log[first_new..].to_vec()
    }

    /// Standings with gaps, best rank first.
    pub fn snapshot_standings(&self) -> Vec<StandingRow> {
        let mut rows = Vec::with_capacity(self.standings.len());
        let mut prev_l: Option<f64> = None;
        for (i, key) in self.standings.iter().enumerate() {
            let state = &self.riders[&key.rider];
            rows.push(StandingRow {
                rank: i + 1,
                rider: key.rider,
                l: key.l,
                gap_to_ahead: prev_l.map(|p| p - key.l),
                stale: !state.active,
                finish_t: state.finish_t,
            });
            prev_l = Some(key.l);
        }
        rows
    }

    fn evaluate(&mut self, tick: i64) -> bool {
        let tick_ms = self.cfg.tick_ms();
        let t = Timestamp(tick * tick_ms);
        let total = self.course.total_length();
        let stale_ms = self.cfg.stale_ms();

        for state in self.riders.values_mut() {
            let Some(rec) = state.record else {
                state.active = false;
                continue;
            };
            let rec_tick_t = rec.t.millis().div_euclid(tick_ms) * tick_ms;
            let age = (t.millis() - rec_tick_t).max(0);
            let mut l = rec.l;
            if state.finish_t.is_none() && t > rec.t {
                if let Some(prev) = state.prev_record {
                    let dt = (rec.t - prev.t) as f64;
                    if dt > 0.0 {
                        let speed = (rec.l - prev.l) / dt;
                        l = (rec.l + speed * (t - rec.t) as f64).clamp(0.0, total);
                    }
                }
            }
            let active = !state.off_course && age <= stale_ms;
            if !active && state.active {
                state.stale_since = Some(t);
            } else if active {
                state.stale_since = None;
            }
            state.active = active;
            state.placement = Placement { l, lateral: state.lateral };
        }

        for (id, state) in self.riders.iter() {
            if state.record.is_some() {
                self.standings.set_key(RankKey { l: state.placement.l, finish_t: state.finish_t, rider: *id });
            }
        }
        self.last_exchanges = self.standings.resort();
        let order: Vec<RiderId> = self.standings.riders().collect();

        // Riders that dropped out.
        for id in &order {
            if !self.riders[id].active {
                self.close_open(*id, t, CloseReason::Stale);
                let s = self.riders.get_mut(id).expect("in standings");
                s.zone_entry = None;
                s.last_overtaken_by = None;
                s.prev_leader = None;
            }
        }

        let active: Vec<RiderId> = order.iter().copied().filter(|id| self.riders[id].active).collect();
        let rank: BTreeMap<RiderId, usize> = active.iter().enumerate().map(|(i, id)| (*id, i)).collect();

        // Completed overtakes: the rider was behind its previous leader and
        // is now ahead of it.
        for &id in &active {
            let Some(prev) = self.riders[&id].prev_leader else { continue };
            let (Some(&mine), Some(&theirs)) = (rank.get(&id), rank.get(&prev)) else { continue };
            if mine < theirs {
                if matches!(self.riders[&id].zone_entry, Some((leader, _)) if leader == prev) {
                    self.close_open(id, t, CloseReason::Overtook);
                    self.riders.get_mut(&id).expect("active").zone_entry = None;
                }
                self.riders.get_mut(&prev).expect("active").last_overtaken_by = Some(id);
            }
        }

        // Drop-back obligations.
        for &id in &active {
            let Some(obligee) = self.riders[&id].last_overtaken_by else { continue };
            if !rank.contains_key(&obligee) {
                self.riders.get_mut(&id).expect("active").last_overtaken_by = None;
                continue;
            }
            let mine = self.riders[&id].placement.l;
            let theirs = self.riders[&obligee].placement.l;
            if mine > theirs {
                self.riders.get_mut(&id).expect("active").last_overtaken_by = None;
                let vid = self.violations.len() as u64 + 1;
                let v = ViolationEvent {
                    id: vid,
                    kind: ViolationKind::DropbackBreach,
                    offender: id,
                    victim: obligee,
                    zone_entry_t: t,
                    start_t: t,
                    end_t: Some(t),
                    start_l: mine,
                    end_l: Some(mine),
                    close_reason: None,
                    recommended_penalty_secs: None,
                };
                self.violations.push(v.clone());
                self.push_log(t, EventKind::DropbackBreach, v);
            } else if theirs - mine >= self.cfg.draft_gap {
                self.riders.get_mut(&id).expect("active").last_overtaken_by = None;
            }
        }

        // Drafting zone of each adjacent pair.
        let grace_ms = self.cfg.grace_ms();
        for (i, &id) in active.iter().enumerate() {
            let leader = i.checked_sub(1).map(|j| active[j]);
            let me = self.riders[&id].placement;
            let in_zone = leader.is_some_and(|lid| zone_test(self.riders[&lid].placement, me, &self.cfg));
            let entry = self.riders[&id].zone_entry;
            if in_zone {
                let lid = leader.expect("in zone implies a leader");
                let entered = match entry {
                    Some((prev, since)) if prev == lid => since,
                    other => {
                        if let Some((prev, _)) = other {
                            let reason =
                                if rank.contains_key(&prev) { CloseReason::LeaderChanged } else { CloseReason::Stale };
                            self.close_open(id, t, reason);
                        }
                        self.riders.get_mut(&id).expect("active").zone_entry = Some((lid, t));
                        t
                    }
                };
                let dwell = t - entered + tick_ms;
                if dwell > grace_ms && self.riders[&id].open_violation.is_none() {
                    let vid = self.violations.len() as u64 + 1;
                    let v = ViolationEvent {
                        id: vid,
                        kind: ViolationKind::Drafting,
                        offender: id,
                        victim: lid,
                        zone_entry_t: entered,
                        start_t: entered + grace_ms,
                        end_t: None,
                        start_l: me.l,
                        end_l: None,
                        close_reason: None,
                        recommended_penalty_secs: Some(DRAFTING_PENALTY_SECS),
                    };
                    self.violations.push(v.clone());
                    self.riders.get_mut(&id).expect("active").open_violation = Some(vid);
                    self.push_log(t, EventKind::ViolationOpened, v);
                }
            } else if let Some((prev, _)) = entry {
                let reason = if rank.contains_key(&prev) { CloseReason::LeftZone } else { CloseReason::Stale };
                self.close_open(id, t, reason);
                self.riders.get_mut(&id).expect("active").zone_entry = None;
            }
        }

        for (i, &id) in active.iter().enumerate() {
            let leader = i.checked_sub(1).map(|j| active[j]);
            self.riders.get_mut(&id).expect("active").prev_leader = leader;
        }
        self.last_evaluated = Some(t);
        !active.is_empty()
    }

    fn close_open(&mut self, rider: RiderId, t: Timestamp, reason: CloseReason) {
        let state = self.riders.get_mut(&rider).expect("known rider");
        let Some(vid) = state.open_violation.take() else { return };
        let l = state.placement.l;
        let v = &mut self.violations[(vid - 1) as usize];
        v.end_t = Some(t);
        v.end_l = Some(l.max(v.start_l));
        v.close_reason = Some(reason);
        let v = v.clone();
        self.push_log(t, EventKind::ViolationClosed, v);
    }

    fn push_log(&mut self, tick: Timestamp, kind: EventKind, violation: ViolationEvent) {
        let seq = self.log.len() as u64 + 1;
        self.log.push(LogEntry { seq, tick, kind, violation });
    }
}
