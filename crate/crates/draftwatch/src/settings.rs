//! Race settings from a flat `key = value` file.

use draftwatch_core::course::DEFAULT_CORRIDOR_WIDTH;
use draftwatch_core::RuleConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rule parameters plus the course corridor width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaceSettings {
    pub draft_gap: f64,
    pub zone_halfwidth: f64,
    pub grace: f64,
    pub tick: f64,
    pub stale_after: f64,
    pub lateral_check: bool,
    pub corridor_width: f64,
}

impl Default for RaceSettings {
    fn default() -> Self {
        RaceSettings::from_rules(RuleConfig::default(), DEFAULT_CORRIDOR_WIDTH)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SettingsError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid setting: {0}")]
    Invalid(&'static str),
}

impl RaceSettings {
    pub fn from_rules(r: RuleConfig, corridor_width: f64) -> Self {
        RaceSettings {
            draft_gap: r.draft_gap,
            zone_halfwidth: r.zone_halfwidth,
            grace: r.grace,
            tick: r.tick,
            stale_after: r.stale_after,
            lateral_check: r.lateral_check,
            corridor_width,
        }
    }

    pub fn rules(&self) -> RuleConfig {
        RuleConfig {
            draft_gap: self.draft_gap,
            zone_halfwidth: self.zone_halfwidth,
            grace: self.grace,
            tick: self.tick,
            stale_after: self.stale_after,
            lateral_check: self.lateral_check,
        }
    }

    pub fn validate(&self) -> Result<(), SettingsError> {
        self.rules().validate().map_err(|e| match e {
            draftwatch_core::EngineError::InvalidConfig(k) => SettingsError::Invalid(k),
            _ => SettingsError::Invalid("rules"),
        })?;
        if !(self.corridor_width.is_finite() && self.corridor_width > 0.0) {
            return Err(SettingsError::Invalid("corridor_width"));
        }
        Ok(())
    }

    /// Overrides defaults with the keys present in `text`. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, SettingsError> {
        let mut s = RaceSettings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(SettingsError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || SettingsError::BadValue { line, key: key.to_string(), value: value.to_string() };
            let slot = match key {
                "draft_gap" => &mut s.draft_gap,
                "zone_halfwidth" => &mut s.zone_halfwidth,
                "grace" => &mut s.grace,
                "tick" => &mut s.tick,
                "stale_after" => &mut s.stale_after,
                "corridor_width" => &mut s.corridor_width,
                "lateral_check" => {
                    s.lateral_check = value.parse().map_err(|_| bad())?;
                    continue;
                }
                _ => return Err(SettingsError::UnknownKey { line, key: key.to_string() }),
            };
            *slot = value.parse().map_err(|_| bad())?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        format!(
            "draft_gap = {}\nzone_halfwidth = {}\ngrace = {}\ntick = {}\nstale_after = {}\nlateral_check = {}\ncorridor_width = {}\n",
            self.draft_gap, self.zone_halfwidth, self.grace, self.tick, self.stale_after, self.lateral_check, self.corridor_width
        )
    }
}
