use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::PageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    Lru,
    Clock,
}

impl Replacement {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lru" | "lru-1" | "lru1" => Ok(Replacement::Lru),
            "clock" => Ok(Replacement::Clock),
            _ => Err(Error::config(format!("unknown replacement policy `{s}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Replacement::Lru => "lru",
            Replacement::Clock => "clock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Hit,
    Miss { evicted: Option<PageId> },
}

impl Probe {
    pub fn is_hit(self) -> bool {
        matches!(self, Probe::Hit)
    }
}

#[derive(Debug, Clone)]
enum Policy {
    /// Recency stamps, plus the reverse index ordered by stamp.
    Lru {
        stamp: HashMap<PageId, u64>,
        order: BTreeMap<u64, PageId>,
        clock: u64,
    },
    Clock {
        frames: Vec<(PageId, bool)>,
        slot: HashMap<PageId, usize>,
        hand: usize,
    },
}

/// Fixed-capacity page buffer with dirty tracking.
#[derive(Debug, Clone)]
pub struct Buffer {
    capacity: usize,
    policy: Policy,
    dirty: HashSet<PageId>,
}

impl Buffer {
    pub fn new(capacity: usize, replacement: Replacement) -> Buffer {
        assert!(capacity >= 1, "buffer needs at least one frame");
        let policy = match replacement {
            Replacement::Lru => Policy::Lru {
                stamp: HashMap::new(),
                order: BTreeMap::new(),
                clock: 0,
            },
            Replacement::Clock => Policy::Clock {
                frames: Vec::with_capacity(capacity),
                slot: HashMap::new(),
                hand: 0,
            },
        };
        Buffer {
            capacity,
            policy,
            dirty: HashSet::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        match &self.policy {
            Policy::Lru { stamp, .. } => stamp.len(),
            Policy::Clock { frames, .. } => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, pid: PageId) -> bool {
        match &self.policy {
            Policy::Lru { stamp, .. } => stamp.contains_key(&pid),
            Policy::Clock { slot, .. } => slot.contains_key(&pid),
        }
    }

    /// Resident pages in ascending id order.
    pub fn resident(&self) -> Vec<PageId> {
        let mut v: Vec<PageId> = match &self.policy {
            Policy::Lru { stamp, .. } => stamp.keys().copied().collect(),
            Policy::Clock { frames, .. } => frames.iter().map(|f| f.0).collect(),
        };
        v.sort_unstable();
        v
    }

    pub fn is_dirty(&self, pid: PageId) -> bool {
        self.dirty.contains(&pid)
    }

    /// Marks a resident page dirty; returns false if it is not resident.
    pub fn mark_dirty(&mut self, pid: PageId) -> bool {
        if self.contains(pid) {
            self.dirty.insert(pid);
            true
        } else {
            false
        }
    }

    /// Flushes a resident dirty page without evicting it.
    pub fn clean(&mut self, pid: PageId) -> bool {
        self.dirty.remove(&pid)
    }

    /// References a page: a hit refreshes it, a miss loads it and evicts a
    /// victim when full. The evicted page's dirty flag is dropped; use
    /// [`Buffer::probe_flush`] to learn whether it was dirty.
    pub fn probe(&mut self, pid: PageId) -> Probe {
        self.probe_flush(pid).0
    }

    /// Like [`Buffer::probe`], also reporting whether the victim was dirty.
    pub fn probe_flush(&mut self, pid: PageId) -> (Probe, bool) {
        let cap = self.capacity;
        let probe = match &mut self.policy {
            Policy::Lru {
                stamp,
                order,
                clock,
            } => {
                *clock += 1;
                if let Some(old) = stamp.insert(pid, *clock) {
                    order.remove(&old);
                    order.insert(*clock, pid);
                    Probe::Hit
                } else {
                    order.insert(*clock, pid);
                    let evicted = if stamp.len() > cap {
                        let (_, victim) = order.pop_first().expect("non-empty");
                        stamp.remove(&victim);
                        Some(victim)
                    } else {
                        None
                    };
                    Probe::Miss { evicted }
                }
            }
            Policy::Clock { frames, slot, hand } => {
                if let Some(&i) = slot.get(&pid) {
                    frames[i].1 = true;
                    Probe::Hit
                } else if frames.len() < cap {
                    slot.insert(pid, frames.len());
                    frames.push((pid, true));
                    Probe::Miss { evicted: None }
                } else {
                    // Second chance: clear reference bits until an
                    // unreferenced frame comes under the hand.
                    loop {
                        let f = &mut frames[*hand];
                        if f.1 {
                            f.1 = false;
                            *hand = (*hand + 1) % cap;
                        } else {
                            break;
                        }
                    }
                    let victim = frames[*hand].0;
                    slot.remove(&victim);
                    frames[*hand] = (pid, true);
                    slot.insert(pid, *hand);
                    *hand = (*hand + 1) % cap;
                    Probe::Miss {
                        evicted: Some(victim),
                    }
                }
            }
        };
        let flushed = match probe {
            Probe::Miss {
                evicted: Some(victim),
            } => self.dirty.remove(&victim),
            _ => false,
        };
        (probe, flushed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> PageId {
        PageId(i)
    }

    #[test]
    fn empty_buffer_misses_without_eviction() {
        for r in [Replacement::Lru, Replacement::Clock] {
            let mut b = Buffer::new(2, r);
            assert_eq!(b.probe(p(1)), Probe::Miss { evicted: None });
        }
    }

    #[test]
    fn lru_evicts_least_recent() {
        let mut b = Buffer::new(2, Replacement::Lru);
        b.probe(p(1));
        b.probe(p(2));
        assert!(b.probe(p(1)).is_hit());
        assert_eq!(b.probe(p(3)), Probe::Miss { evicted: Some(p(2)) });
    }

    #[test]
    fn repeated_pages_hit() {
        let mut b = Buffer::new(2, Replacement::Lru);
        let hits = [1, 2, 1].iter().filter(|&&i| b.probe(p(i)).is_hit()).count();
        assert_eq!(hits, 1);
    }

    #[test]
    fn single_frame_thrashes() {
        for r in [Replacement::Lru, Replacement::Clock] {
            let mut b = Buffer::new(1, r);
            let misses = (0..200).filter(|i| !b.probe(p(i % 2)).is_hit()).count();
            assert_eq!(misses, 200);
        }
    }

    #[test]
    fn clock_gives_second_chance() {
        let mut b = Buffer::new(2, Replacement::Clock);
        b.probe(p(1));
        b.probe(p(2));
        // both referenced: the sweep clears 1 and 2, then evicts 1
        assert_eq!(b.probe(p(3)), Probe::Miss { evicted: Some(p(1)) });
        b.probe(p(2));
        // 2 is referenced again, 3 is referenced; hand is at 2's frame
        assert_eq!(b.probe(p(4)), Probe::Miss { evicted: Some(p(2)) });
    }

    #[test]
    fn dirty_flag_follows_eviction() {
        let mut b = Buffer::new(1, Replacement::Lru);
        b.probe(p(1));
        assert!(b.mark_dirty(p(1)));
        assert!(!b.mark_dirty(p(9)));
        let (probe, flushed) = b.probe_flush(p(2));
        assert_eq!(probe, Probe::Miss { evicted: Some(p(1)) });
        assert!(flushed);
        assert!(!b.is_dirty(p(1)));
    }
}
