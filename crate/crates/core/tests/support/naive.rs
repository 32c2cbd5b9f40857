//! Reference drafting detector. Every tick it recomputes each active
//! rider's leader by an all-pairs scan instead of maintaining sorted
//! standings, then applies the same rule set as the engine.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct Report {
    pub rider: u32,
    pub t_ms: i64,
    pub l: f64,
    pub lateral: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NaiveConfig {
    pub draft_gap: f64,
    pub halfwidth: f64,
    pub grace_ms: i64,
    pub tick_ms: i64,
    pub stale_ms: i64,
    pub total: f64,
}

/// One log line, id-free: (kind, tick, offender, victim, zone entry,
/// start, end, start_l bits, end_l bits, close reason).
pub type Entry = (&'static str, i64, u32, u32, i64, i64, Option<i64>, u64, Option<u64>, Option<&'static str>);

#[derive(Debug, Clone)]
struct Open {
    victim: u32,
    zone_entry: i64,
    start_t: i64,
    start_l: f64,
}

#[derive(Debug, Default, Clone)]
struct Rider {
    last: Option<Report>,
    prev: Option<Report>,
    active: bool,
    l: f64,
    lateral: f64,
    zone: Option<(u32, i64)>,
    open: Option<Open>,
    obligation: Option<u32>,
    prev_leader: Option<u32>,
}

fn ahead(a: (u32, f64), b: (u32, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

pub struct Naive {
    cfg: NaiveConfig,
    riders: BTreeMap<u32, Rider>,
    pub log: Vec<Entry>,
    last_t: i64,
}

impl Naive {
    pub fn new(cfg: NaiveConfig) -> Self {
        Naive { cfg, riders: BTreeMap::new(), log: Vec::new(), last_t: 0 }
    }

    fn close(&mut self, id: u32, t: i64, reason: &'static str) {
        let r = self.riders.get_mut(&id).unwrap();
        if let Some(o) = r.open.take() {
            let end_l = r.l.max(o.start_l);
            self.log.push((
                "violation_closed",
                t,
                id,
                o.victim,
                o.zone_entry,
                o.start_t,
                Some(t),
                o.start_l.to_bits(),
                Some(end_l.to_bits()),
                Some(reason),
            ));
        }
    }

    /// Runs one tick: `reports` are the fixes whose time falls inside it.
    pub fn tick(&mut self, k: i64, reports: &[Report]) {
        let c = self.cfg;
        let t = k * c.tick_ms;
        for rep in reports {
            let r = self.riders.entry(rep.rider).or_default();
            r.prev = r.last.replace(*rep);
        }
        for r in self.riders.values_mut() {
            let Some(rec) = r.last else { continue };
            let age = (t - rec.t_ms.div_euclid(c.tick_ms) * c.tick_ms).max(0);
            let mut l = rec.l;
            if t > rec.t_ms {
                if let Some(prev) = r.prev {
                    let dt = (rec.t_ms - prev.t_ms) as f64;
                    if dt > 0.0 {
                        let speed = (rec.l - prev.l) / dt;
                        l = (rec.l + speed * (t - rec.t_ms) as f64).clamp(0.0, c.total);
                    }
                }
            }
            r.l = l;
            r.lateral = rec.lateral;
            r.active = age <= c.stale_ms;
        }
        let ids: Vec<u32> = self.riders.keys().copied().collect();
        for &id in &ids {
            let r = &self.riders[&id];
            if r.last.is_some() && !r.active {
                self.close(id, t, "stale");
                let r = self.riders.get_mut(&id).unwrap();
                r.zone = None;
                r.obligation = None;
                r.prev_leader = None;
            }
        }
        let active: Vec<(u32, f64)> =
            ids.iter().filter(|id| self.riders[id].active).map(|id| (*id, self.riders[id].l)).collect();
        let is_active = |id: u32| active.iter().any(|a| a.0 == id);
        let key = |id: u32| active.iter().find(|a| a.0 == id).copied().unwrap();
        // All-pairs: the leader is the closest rider ahead.
        let mut leader: BTreeMap<u32, Option<u32>> = BTreeMap::new();
        for &me in &active {
            let mut best: Option<(u32, f64)> = None;
            for &other in &active {
                if other.0 != me.0 && ahead(other, me) && best.is_none_or(|b| ahead(b, other)) {
                    best = Some(other);
                }
            }
            leader.insert(me.0, best.map(|b| b.0));
        }
        let mut by_rank = active.clone();
        by_rank.sort_by_key(|a| active.iter().filter(|o| ahead(**o, *a)).count());

        for &(id, _) in &by_rank {
            let Some(p) = self.riders[&id].prev_leader else { continue };
            if is_active(p) && ahead(key(id), key(p)) {
                if matches!(self.riders[&id].zone, Some((z, _)) if z == p) {
                    self.close(id, t, "overtook");
                    self.riders.get_mut(&id).unwrap().zone = None;
                }
                self.riders.get_mut(&p).unwrap().obligation = Some(id);
            }
        }
        for &(id, mine) in &by_rank {
            let Some(o) = self.riders[&id].obligation else { continue };
            if !is_active(o) {
                self.riders.get_mut(&id).unwrap().obligation = None;
                continue;
            }
            let theirs = self.riders[&o].l;
            if mine > theirs {
                self.riders.get_mut(&id).unwrap().obligation = None;
                self.log.push(("dropback_breach", t, id, o, t, t, Some(t), mine.to_bits(), Some(mine.to_bits()), None));
            } else if theirs - mine >= c.draft_gap {
                self.riders.get_mut(&id).unwrap().obligation = None;
            }
        }
        for &(id, l) in &by_rank {
            let lead = leader[&id];
            let lat = self.riders[&id].lateral;
            let in_zone = lead.is_some_and(|lid| {
                let lr = &self.riders[&lid];
                let gap = lr.l - l;
                gap > 0.0 && gap < c.draft_gap && (lr.lateral - lat).abs() <= c.halfwidth
            });
            let zone = self.riders[&id].zone;
            if in_zone {
                let lid = lead.unwrap();
                let entered = match zone {
                    Some((z, since)) if z == lid => since,
                    other => {
                        if let Some((z, _)) = other {
                            self.close(id, t, if is_active(z) { "leader_changed" } else { "stale" });
                        }
                        self.riders.get_mut(&id).unwrap().zone = Some((lid, t));
                        t
                    }
                };
                if t - entered + c.tick_ms > c.grace_ms && self.riders[&id].open.is_none() {
                    let o = Open { victim: lid, zone_entry: entered, start_t: entered + c.grace_ms, start_l: l };
                    self.log.push(("violation_opened", t, id, lid, entered, o.start_t, None, l.to_bits(), None, None));
                    self.riders.get_mut(&id).unwrap().open = Some(o);
                }
            } else if let Some((z, _)) = zone {
                self.close(id, t, if is_active(z) { "left_zone" } else { "stale" });
                self.riders.get_mut(&id).unwrap().zone = None;
            }
        }
        for &(id, _) in &active {
            self.riders.get_mut(&id).unwrap().prev_leader = leader[&id];
        }
        self.last_t = t;
    }

    pub fn finish(&mut self) {
        let ids: Vec<u32> = self.riders.keys().copied().collect();
        for id in ids {
            self.close(id, self.last_t, "race_end");
        }
    }
}
