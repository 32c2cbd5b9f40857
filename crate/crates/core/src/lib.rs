//! Pure algorithmic core of the drafting detector.
//!
//! Everything here is `no_std` with `alloc`: geodetic to UTM projection,
//! projection of riders onto a surveyed course, live standings and the
//! drafting rule state machine. File formats, replay, networking and the
//! command line live in the `draftwatch` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod course;
pub mod engine;
pub mod geodesy;
pub mod time;

pub use course::{Course, CourseError, Projection};
pub use engine::{
    CloseReason, Engine, EngineError, EventKind, LogEntry, PositionRecord, RiderId, RuleConfig, StandingRow, Standings,
    ViolationEvent, ViolationKind,
};
pub use geodesy::{Ellipsoid, GeoError, GeodeticFix, UtmFrame, UtmPoint};
pub use time::Timestamp;
