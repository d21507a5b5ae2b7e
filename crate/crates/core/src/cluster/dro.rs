use std::collections::BTreeSet;

use super::layout::{needed, place_units, spanned};
use super::{ClusterIo, Clusterer, ClustererKind, DroParams, UsageStats};
use crate::error::Result;
use crate::ids::{Oid, PageId};
use crate::sim::{first_fit, Store};
use crate::workload::{AccessRecord, OpKind};

/// Frequency-driven re-clustering of the worst pages, bounded by `MaxD` and
/// `MaxDR` pages per round. Statistics restart with every window.
#[derive(Debug, Clone)]
pub struct Dro {
    params: DroParams,
    stats: UsageStats,
    since: u64,
    window: u64,
}

impl Dro {
    pub fn new(params: DroParams) -> Dro {
        let window = ((1.0 / params.pc_rate).round() as u64).max(1);
        Dro {
            params,
            stats: UsageStats::new(None),
            since: 0,
            window,
        }
    }

    /// Transactions per analysis window.
    pub fn window(&self) -> u64 {
        self.window
    }

    /// Most pages one round may write.
    pub fn page_budget(&self, total_pages: usize) -> usize {
        let by_rate = (self.params.max_dr * total_pages as f64).floor() as usize;
        (self.params.max_d as usize).min(by_rate)
    }

    /// Candidate pages, worst first: used at least `MinUR`, not fully used,
    /// and touched by at least `MinLT` transactions of the window.
    fn candidates(&self, store: &Store) -> (Vec<PageId>, usize) {
        let usage = self.stats.page_usage(&store.pages);
        let mut c: Vec<(f64, PageId)> = usage
            .iter()
            .filter(|(_, u)| {
                let r = u.rate();
                r >= self.params.min_ur && r < 1.0 && u.txns >= self.params.min_lt as u64
            })
            .map(|(&p, u)| (u.badness(), p))
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        (c.into_iter().map(|(_, p)| p).collect(), usage.len())
    }

    fn run_round(&mut self, store: &mut Store) -> Result<ClusterIo> {
        let (cands, touched) = self.candidates(store);
        if touched == 0 || (cands.len() as f64) < self.params.pc_rate * touched as f64 {
            return Ok(ClusterIo::default());
        }
        let budget = self.page_budget(store.pages.page_count());
        if budget == 0 || cands.is_empty() {
            return Ok(ClusterIo::default());
        }
        // Hottest accessed objects of the candidate pages.
        let mut hot: Vec<(u64, Oid)> = cands
            .iter()
            .flat_map(|&p| store.pages.page(p).oids.clone())
            .map(|o| (self.stats.frequency(o), o))
            .filter(|(f, _)| *f > 0)
            .collect();
        hot.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let cap = store.pages.page_size();
        let mut chosen: Vec<Oid> = Vec::new();
        let mut sizes: Vec<u32> = Vec::new();
        for (_, o) in hot {
            sizes.push(store.pages.size_of(o));
            if first_fit(&sizes, budget, cap).is_some() {
                chosen.push(o);
            } else {
                sizes.pop();
            }
        }
        if chosen.len() < 2 {
            return Ok(ClusterIo::default());
        }
        let from = spanned(&store.pages, &chosen);
        let resemblance = needed(&store.pages, &chosen) as f64 / from.len() as f64;
        if resemblance >= self.params.max_rr {
            return Ok(ClusterIo::default());
        }
        let mut io = ClusterIo {
            ran: true,
            ..Default::default()
        };
        let sources: BTreeSet<PageId> = from;
        for &p in &sources {
            io.reads += store.fetch(p) as u64;
        }
        let slots = first_fit(&sizes, budget, cap).expect("checked above");
        let mut units: Vec<Vec<Oid>> = vec![Vec::new(); budget];
        for (o, s) in chosen.into_iter().zip(slots) {
            units[s].push(o);
        }
        units.retain(|u| !u.is_empty());
        let fresh = place_units(&mut store.pages, &units)?;
        for &p in &fresh {
            io.writes += store.write_back(p);
        }
        io.pages = fresh.len() as u64;
        Ok(io)
    }
}

impl Clusterer for Dro {
    fn kind(&self) -> ClustererKind {
        ClustererKind::Dro
    }

    fn observe(&mut self, rec: &AccessRecord, _: &Store) {
        if self.params.su_ind || rec.op_kind != OpKind::SequentialUpdate {
            self.stats.observe(rec);
        }
        self.since += 1;
    }

    fn due(&self) -> bool {
        self.since >= self.window
    }

    fn recluster(&mut self, store: &mut Store) -> Result<ClusterIo> {
        self.since = 0;
        let io = self.run_round(store);
        self.stats.reset();
        io
    }
}
