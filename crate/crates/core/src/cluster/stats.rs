use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ids::{Oid, PageId};
use crate::sim::PageMap;
use crate::workload::AccessRecord;

/// Per-page view of the window, computed against the current placement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PageUsage {
    /// Distinct objects of the page accessed in the window.
    pub accessed: usize,
    /// Objects currently on the page.
    pub resident: usize,
    /// Transactions that touched the page.
    pub txns: u64,
    /// Object accesses that landed on the page.
    pub accesses: u64,
}

impl PageUsage {
    /// Fraction of the page's objects accessed in the window.
    pub fn rate(&self) -> f64 {
        if self.resident == 0 {
            0.0
        } else {
            self.accessed as f64 / self.resident as f64
        }
    }

    /// `(1 - usage rate) × accesses`: high for pages that are used often
    /// but mostly hold objects nobody asked for.
    pub fn badness(&self) -> f64 {
        (1.0 - self.rate()) * self.accesses as f64
    }
}

/// Object frequencies and consecutive-access transitions over a window of
/// recent transactions. With a capacity the window slides; without one it
/// grows until [`UsageStats::reset`].
#[derive(Debug, Clone, Default)]
pub struct UsageStats {
    capacity: Option<usize>,
    window: VecDeque<Vec<Oid>>,
    freq: BTreeMap<Oid, u64>,
    transitions: BTreeMap<(Oid, Oid), u64>,
}

fn bump<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, up: bool) {
    if up {
        *map.entry(key).or_default() += 1;
    } else if let std::collections::btree_map::Entry::Occupied(mut e) = map.entry(key) {
        *e.get_mut() -= 1;
        if *e.get() == 0 {
            e.remove();
        }
    }
}

impl UsageStats {
    pub fn new(capacity: Option<usize>) -> UsageStats {
        UsageStats {
            capacity,
            ..Default::default()
        }
    }

    fn account(&mut self, oids: &[Oid], up: bool) {
        for &o in oids {
            bump(&mut self.freq, o, up);
        }
        for w in oids.windows(2) {
            if w[0] != w[1] {
                bump(&mut self.transitions, (w[0], w[1]), up);
            }
        }
    }

    pub fn observe(&mut self, rec: &AccessRecord) {
        let oids: Vec<Oid> = rec.oids().collect();
        self.account(&oids, true);
        self.window.push_back(oids);
        if let Some(cap) = self.capacity {
            while self.window.len() > cap {
                let old = self.window.pop_front().unwrap();
                self.account(&old, false);
            }
        }
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.freq.clear();
        self.transitions.clear();
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn frequency(&self, oid: Oid) -> u64 {
        self.freq.get(&oid).copied().unwrap_or(0)
    }

    pub fn frequencies(&self) -> &BTreeMap<Oid, u64> {
        &self.freq
    }

    /// Ordered pair counts of consecutive accesses within a transaction.
    pub fn transitions(&self) -> &BTreeMap<(Oid, Oid), u64> {
        &self.transitions
    }

    pub fn transition(&self, a: Oid, b: Oid) -> u64 {
        self.transitions.get(&(a, b)).copied().unwrap_or(0)
    }

    /// Usage of every page touched in the window.
    pub fn page_usage(&self, pages: &PageMap) -> BTreeMap<PageId, PageUsage> {
        let mut seen: BTreeMap<PageId, BTreeSet<Oid>> = BTreeMap::new();
        let mut out: BTreeMap<PageId, PageUsage> = BTreeMap::new();
        for rec in &self.window {
            let mut touched = BTreeSet::new();
            for &o in rec {
                let Some(pid) = pages.page_of(o) else { continue };
                seen.entry(pid).or_default().insert(o);
                out.entry(pid).or_default().accesses += 1;
                touched.insert(pid);
            }
            for pid in touched {
                out.entry(pid).or_default().txns += 1;
            }
        }
        for (pid, u) in out.iter_mut() {
            u.accessed = seen[pid].len();
            u.resident = pages.page(*pid).oids.len();
        }
        out
    }

    pub fn usage_rate(&self, pid: PageId, pages: &PageMap) -> f64 {
        let on_page: BTreeSet<Oid> = pages.page(pid).oids.iter().copied().collect();
        if on_page.is_empty() {
            return 0.0;
        }
        let used = self
            .freq
            .keys()
            .filter(|o| on_page.contains(o))
            .count();
        used as f64 / on_page.len() as f64
    }
}
