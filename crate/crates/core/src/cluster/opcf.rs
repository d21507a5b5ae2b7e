use std::collections::{BTreeMap, BTreeSet};

use super::layout::Dsu;
use super::{ClusterIo, Clusterer, ClustererKind, OpcfParams, UsageStats};
use crate::error::{Error, Result};
use crate::ids::{Oid, PageId};
use crate::sim::Store;
use crate::workload::AccessRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpcfVariant {
    /// Greedy graph partitioning over the transition graph.
    Gp,
    /// Probability ranking: hottest objects first.
    Prp,
}

/// Opportunistic prioritised clustering: every `NPA` transactions, repack
/// the `NRI` worst pages that are already in the buffer, in place.
#[derive(Debug, Clone)]
pub struct Opcf {
    variant: OpcfVariant,
    params: OpcfParams,
    stats: UsageStats,
    since: u64,
}

impl Opcf {
    pub fn new(variant: OpcfVariant, params: OpcfParams) -> Opcf {
        let stats = UsageStats::new(Some(params.n as usize));
        Opcf {
            variant,
            params,
            stats,
            since: 0,
        }
    }

    /// Resident pages of the window, worst first, at most `NRI`.
    fn candidates(&self, store: &Store) -> Vec<PageId> {
        let mut c: Vec<(f64, PageId)> = self
            .stats
            .page_usage(&store.pages)
            .into_iter()
            .filter(|(p, _)| store.buffer.contains(*p))
            .map(|(p, u)| (u.badness(), p))
            .filter(|(b, _)| *b >= self.params.cbt && *b > 0.0)
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        c.truncate(self.params.nri as usize);
        c.into_iter().map(|(_, p)| p).collect()
    }

    fn by_frequency(&self, oids: &mut [Oid]) {
        oids.sort_by(|a, b| {
            self.stats
                .frequency(*b)
                .cmp(&self.stats.frequency(*a))
                .then(a.cmp(b))
        });
    }

    /// Merges objects along the heaviest transitions while the merged group
    /// still fits a page; groups then go hottest first.
    fn graph_order(&self, oids: &[Oid], store: &Store) -> Vec<Oid> {
        let index: BTreeMap<Oid, usize> = oids.iter().enumerate().map(|(i, &o)| (o, i)).collect();
        let mut weight: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (&(a, b), &w) in self.stats.transitions() {
            if let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) {
                *weight.entry((i.min(j), i.max(j))).or_default() += w;
            }
        }
        let mut edges: Vec<((usize, usize), u64)> = weight.into_iter().collect();
        edges.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut dsu = Dsu::new(oids.len());
        let mut bytes: Vec<u32> = oids.iter().map(|&o| store.pages.size_of(o)).collect();
        for ((i, j), _) in edges {
            let (ri, rj) = (dsu.find(i), dsu.find(j));
            if ri != rj && bytes[ri] + bytes[rj] <= store.pages.page_size() {
                let r = dsu.union(ri, rj);
                bytes[r] = bytes[ri] + bytes[rj];
            }
        }
        let mut groups: BTreeMap<usize, Vec<Oid>> = BTreeMap::new();
        for (i, &o) in oids.iter().enumerate() {
            groups.entry(dsu.find(i)).or_default().push(o);
        }
        let mut groups: Vec<(u64, Vec<Oid>)> = groups
            .into_values()
            .map(|mut g| {
                self.by_frequency(&mut g);
                (g.iter().map(|&o| self.stats.frequency(o)).sum(), g)
            })
            .collect();
        groups.sort_by(|a, b| b.0.cmp(&a.0).then(a.1[0].cmp(&b.1[0])));
        groups.into_iter().flat_map(|(_, g)| g).collect()
    }

    fn run_round(&self, store: &mut Store) -> Result<ClusterIo> {
        let pages = self.candidates(store);
        if pages.len() < 2 {
            return Ok(ClusterIo::default());
        }
        let objects: Vec<Oid> = pages
            .iter()
            .flat_map(|&p| store.pages.page(p).oids.clone())
            .collect();
        let order = match self.variant {
            OpcfVariant::Prp => {
                let mut o = objects;
                self.by_frequency(&mut o);
                o
            }
            OpcfVariant::Gp => self.graph_order(&objects, store),
        };
        let changed = match store.pages.repack(&pages, &order) {
            Ok(c) => c,
            // The new order does not bin-pack into the same pages; keep
            // the current layout.
            Err(Error::Placement(_)) => return Ok(ClusterIo::default()),
            Err(e) => return Err(e),
        };
        let mut io = ClusterIo {
            ran: !changed.is_empty(),
            pages: changed.len() as u64,
            ..Default::default()
        };
        let distinct: BTreeSet<PageId> = changed.into_iter().collect();
        for p in distinct {
            io.writes += store.write_back(p);
        }
        Ok(io)
    }
}

impl Clusterer for Opcf {
    fn kind(&self) -> ClustererKind {
        match self.variant {
            OpcfVariant::Gp => ClustererKind::OpcfGp,
            OpcfVariant::Prp => ClustererKind::OpcfPrp,
        }
    }

    fn observe(&mut self, rec: &AccessRecord, _: &Store) {
        self.stats.observe(rec);
        self.since += 1;
    }

    fn due(&self) -> bool {
        self.since >= self.params.npa as u64
    }

    fn recluster(&mut self, store: &mut Store) -> Result<ClusterIo> {
        self.since = 0;
        self.run_round(store)
    }
}
