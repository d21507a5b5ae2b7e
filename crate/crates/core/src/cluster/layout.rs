use std::collections::BTreeSet;

use crate::error::Result;
use crate::ids::{Oid, PageId};
use crate::sim::PageMap;

/// Moves units of co-accessed objects onto fresh pages. A unit that fits a
/// page goes whole onto the first fresh page with room for it; a larger
/// unit fills fresh pages in order. Returns the fresh pages.
pub fn place_units(pages: &mut PageMap, units: &[Vec<Oid>]) -> Result<Vec<PageId>> {
    let cap = pages.page_size();
    let mut fresh: Vec<PageId> = Vec::new();
    for unit in units {
        let bytes: u32 = unit.iter().map(|&o| pages.size_of(o)).sum();
        if bytes <= cap {
            let slot = fresh
                .iter()
                .copied()
                .find(|&p| pages.page(p).used + bytes <= cap);
            let pid = match slot {
                Some(p) => p,
                None => {
                    let p = pages.new_page();
                    fresh.push(p);
                    p
                }
            };
            for &o in unit {
                pages.move_object(o, pid)?;
            }
        } else {
            let mut pid: Option<PageId> = None;
            for &o in unit {
                let size = pages.size_of(o);
                let target = match pid {
                    Some(p) if pages.page(p).used + size <= cap => p,
                    _ => {
                        let p = pages.new_page();
                        fresh.push(p);
                        p
                    }
                };
                pages.move_object(o, target)?;
                pid = Some(target);
            }
        }
    }
    Ok(fresh)
}

/// Distinct pages currently holding `oids`.
pub(crate) fn spanned(pages: &PageMap, oids: &[Oid]) -> BTreeSet<PageId> {
    oids.iter().filter_map(|&o| pages.page_of(o)).collect()
}

/// Pages needed to hold `oids` if packed tightly.
pub(crate) fn needed(pages: &PageMap, oids: &[Oid]) -> usize {
    let bytes: u64 = oids.iter().map(|&o| pages.size_of(o) as u64).sum();
    bytes.div_ceil(pages.page_size() as u64) as usize
}

/// Minimal union-find over dense indices.
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two sets; the smaller root index becomes the representative.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.parent[hi] = lo;
        lo
    }
}
