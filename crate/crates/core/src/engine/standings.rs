use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::RiderId;
use crate::time::Timestamp;

/// Sort key of one rider: path length descending, then earlier finish,
/// then lower start number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankKey {
    pub l: f64,
    pub finish_t: Option<Timestamp>,
    pub rider: RiderId,
}

impl RankKey {
    pub fn new(rider: RiderId, l: f64) -> Self {
        RankKey { l, finish_t: None, rider }
    }

    /// `Less` means `self` ranks ahead of `other`.
    pub fn rank_cmp(&self, other: &RankKey) -> Ordering {
        other
            .l
            .total_cmp(&self.l)
            .then_with(|| match (self.finish_t, other.finish_t) {
                (Some(a), Some(b)) => a.cmp(&b),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
            .then_with(|| self.rider.cmp(&other.rider))
    }
}

/// Riders ordered by decreasing path length.
///
/// Positions change by adjacent exchanges only. Riders move little between
/// fixes, so an update costs a handful of swaps rather than a full sort.
#[derive(Debug, Clone, Default)]
pub struct Standings {
    order: Vec<RankKey>,
    index: BTreeMap<RiderId, usize>,
}

impl Standings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, rider: RiderId) -> bool {
        self.index.contains_key(&rider)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RankKey> {
        self.order.iter()
    }

    pub fn riders(&self) -> impl Iterator<Item = RiderId> + '_ {
        self.order.iter().map(|k| k.rider)
    }

    /// Zero-based rank.
    pub fn position(&self, rider: RiderId) -> Option<usize> {
        self.index.get(&rider).copied()
    }

    pub fn key(&self, rider: RiderId) -> Option<&RankKey> {
        self.position(rider).map(|i| &self.order[i])
    }

    pub fn ahead_of(&self, rider: RiderId) -> Option<RiderId> {
        let i = self.position(rider)?;
        i.checked_sub(1).map(|j| self.order[j].rider)
    }

    pub fn behind(&self, rider: RiderId) -> Option<RiderId> {
        let i = self.position(rider)?;
        self.order.get(i + 1).map(|k| k.rider)
    }

    /// Sets a rider's key and moves it into place. Returns the number of
    /// adjacent exchanges made.
    pub fn update(&mut self, key: RankKey) -> usize {
        let i = match self.index.get(&key.rider) {
            Some(&i) => {
                self.order[i] = key;
                i
            }
            None => {
                self.order.push(key);
                self.index.insert(key.rider, self.order.len() - 1);
                self.order.len() - 1
            }
        };
        let mut swaps = 0;
        let mut i = i;
        while i > 0 && self.order[i].rank_cmp(&self.order[i - 1]) == Ordering::Less {
            self.swap(i - 1, i);
            i -= 1;
            swaps += 1;
        }
        while i + 1 < self.order.len() && self.order[i].rank_cmp(&self.order[i + 1]) == Ordering::Greater {
            self.swap(i, i + 1);
            i += 1;
            swaps += 1;
        }
        swaps
    }

    /// Sets a rider's key without reordering; follow with [`Standings::resort`].
    pub fn set_key(&mut self, key: RankKey) {
        match self.index.get(&key.rider) {
            Some(&i) => self.order[i] = key,
            None => {
                self.order.push(key);
                self.index.insert(key.rider, self.order.len() - 1);
            }
        }
    }

    /// Insertion pass over the nearly-sorted order. The exchange count equals
    /// the number of rider pairs whose relative order changed.
    pub fn resort(&mut self) -> usize {
        let mut swaps = 0;
        for start in 1..self.order.len() {
            let mut i = start;
            while i > 0 && self.order[i].rank_cmp(&self.order[i - 1]) == Ordering::Less {
                self.swap(i - 1, i);
                i -= 1;
                swaps += 1;
            }
        }
        swaps
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.order.swap(a, b);
        self.index.insert(self.order[a].rider, a);
        self.index.insert(self.order[b].rider, b);
    }
}
