use crate::time::secs_to_millis;

use super::EngineError;

/// Drafting rule parameters. Defaults give the 2 m x 7 m zone behind each
/// rider and a 20 s allowance for passing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    /// Depth of the drafting zone along the course, metres.
    pub draft_gap: f64,
    /// Half the zone width, metres.
    pub zone_halfwidth: f64,
    /// Seconds a rider may stay in the zone; a violation needs strictly more.
    pub grace: f64,
    /// Evaluation interval, seconds.
    pub tick: f64,
    /// A rider with no fix for longer than this is stale, seconds.
    pub stale_after: f64,
    /// When false only the along-course gap is checked.
    pub lateral_check: bool,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            draft_gap: 7.0,
            zone_halfwidth: 1.0,
            grace: 20.0,
            tick: 1.0,
            stale_after: 3.0,
            lateral_check: true,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fields = [
            ("draft_gap", self.draft_gap),
            ("zone_halfwidth", self.zone_halfwidth),
            ("grace", self.grace),
            ("tick", self.tick),
            ("stale_after", self.stale_after),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(EngineError::InvalidConfig(name));
            }
        }
        if secs_to_millis(self.tick) == 0 {
            return Err(EngineError::InvalidConfig("tick"));
        }
        Ok(())
    }

    pub(crate) fn tick_ms(&self) -> i64 {
        secs_to_millis(self.tick)
    }

    pub(crate) fn grace_ms(&self) -> i64 {
        secs_to_millis(self.grace)
    }

    pub(crate) fn stale_ms(&self) -> i64 {
        secs_to_millis(self.stale_after)
    }
}

/// A rider's place on the course at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Placement {
    pub l: f64,
    pub lateral: f64,
}

/// True when `follower` sits inside the drafting zone trailing `leader`.
pub fn zone_test(leader: Placement, follower: Placement, cfg: &RuleConfig) -> bool {
    let gap = leader.l - follower.l;
    let depth = gap > 0.0 && gap < cfg.draft_gap;
    depth && (!cfg.lateral_check || (leader.lateral - follower.lateral).abs() <= cfg.zone_halfwidth)
}
