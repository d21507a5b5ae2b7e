use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::layout::{needed, place_units, spanned};
use super::{ClusterIo, Clusterer, ClustererKind, DstcParams, UsageStats};
use crate::error::Result;
use crate::ids::{Oid, PageId};
use crate::sim::{PageMap, Store};
use crate::workload::AccessRecord;

/// Consolidated weights below this are forgotten.
const FORGET_BELOW: f64 = 1e-3;

/// Transition-driven clustering without conservatism: every `p` transactions,
/// each clustering unit that would occupy at least `n_p` fewer pages than it
/// spans is moved onto fresh pages, however small the gain, and every page it
/// must read costs an I/O.
#[derive(Debug, Clone)]
pub struct Dstc {
    params: DstcParams,
    window: UsageStats,
    /// Undirected consolidated transition weights, keyed `(low, high)`.
    consolidated: BTreeMap<(Oid, Oid), f64>,
    in_window: u64,
    since: u64,
}

impl Dstc {
    pub fn new(params: DstcParams) -> Dstc {
        Dstc {
            params,
            window: UsageStats::new(None),
            consolidated: BTreeMap::new(),
            in_window: 0,
            since: 0,
        }
    }

    /// Ages old weights by `w` and adds the transitions of the finished
    /// window that pass the elementary thresholds.
    fn consolidate(&mut self) {
        let p = &self.params;
        for v in self.consolidated.values_mut() {
            *v *= p.w;
        }
        let freq = self.window.frequencies();
        let mut fresh: BTreeMap<(Oid, Oid), f64> = BTreeMap::new();
        for (&(a, b), &c) in self.window.transitions() {
            let frequent = |o: &Oid| freq.get(o).copied().unwrap_or(0) as f64 >= p.t_fa;
            if frequent(&a) && frequent(&b) {
                *fresh.entry((a.min(b), a.max(b))).or_default() += c as f64;
            }
        }
        for (k, c) in fresh {
            if c >= p.t_fe {
                *self.consolidated.entry(k).or_default() += c;
            }
        }
        self.consolidated.retain(|_, v| *v >= FORGET_BELOW);
        self.window.reset();
        self.in_window = 0;
    }

    /// Objects linked by transitions weighing at least `T_fc`, laid out
    /// component by component (heaviest component first) by a best-edge
    /// breadth-first walk, then cut into page-sized units.
    pub fn units(&self, pages: &PageMap) -> Vec<Vec<Oid>> {
        let mut adj: BTreeMap<Oid, Vec<(f64, Oid)>> = BTreeMap::new();
        for (&(a, b), &w) in &self.consolidated {
            if w >= self.params.t_fc {
                adj.entry(a).or_default().push((w, b));
                adj.entry(b).or_default().push((w, a));
            }
        }
        for n in adj.values_mut() {
            n.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        }
        let degree = |o: &Oid| adj[o].iter().map(|e| e.0).sum::<f64>();
        let mut starts: Vec<Oid> = adj.keys().copied().collect();
        starts.sort_by(|a, b| degree(b).total_cmp(&degree(a)).then(a.cmp(b)));

        let mut seen: BTreeSet<Oid> = BTreeSet::new();
        let mut comps: Vec<(f64, Vec<Oid>)> = Vec::new();
        for s in starts {
            if !seen.insert(s) {
                continue;
            }
            let mut order = Vec::new();
            let mut queue = VecDeque::from([s]);
            while let Some(o) = queue.pop_front() {
                order.push(o);
                for &(_, nb) in &adj[&o] {
                    if seen.insert(nb) {
                        queue.push_back(nb);
                    }
                }
            }
            let weight = order.iter().map(degree).sum();
            comps.push((weight, order));
        }
        comps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1[0].cmp(&b.1[0])));

        let cap = pages.page_size();
        let mut units = Vec::new();
        for (_, order) in comps {
            let mut unit: Vec<Oid> = Vec::new();
            let mut bytes = 0;
            for o in order {
                let size = pages.size_of(o);
                if !unit.is_empty() && bytes + size > cap {
                    units.push(std::mem::take(&mut unit));
                    bytes = 0;
                }
                unit.push(o);
                bytes += size;
            }
            if !unit.is_empty() {
                units.push(unit);
            }
        }
        units
    }

    fn run_round(&mut self, store: &mut Store) -> Result<ClusterIo> {
        let gain = self.params.n_p as usize;
        let selected: Vec<Vec<Oid>> = self
            .units(&store.pages)
            .into_iter()
            .filter(|u| spanned(&store.pages, u).len() >= needed(&store.pages, u) + gain)
            .collect();
        if selected.is_empty() {
            return Ok(ClusterIo::default());
        }
        let mut io = ClusterIo {
            ran: true,
            ..Default::default()
        };
        let sources: BTreeSet<PageId> = selected
            .iter()
            .flat_map(|u| spanned(&store.pages, u))
            .collect();
        for p in sources {
            io.reads += store.fetch(p) as u64;
        }
        let fresh = place_units(&mut store.pages, &selected)?;
        for &p in &fresh {
            io.writes += store.write_back(p);
        }
        io.pages = fresh.len() as u64;
        Ok(io)
    }
}

impl Clusterer for Dstc {
    fn kind(&self) -> ClustererKind {
        ClustererKind::DstcLike
    }

    fn observe(&mut self, rec: &AccessRecord, _: &Store) {
        self.window.observe(rec);
        self.in_window += 1;
        self.since += 1;
        if self.in_window >= self.params.n as u64 {
            self.consolidate();
        }
    }

    fn due(&self) -> bool {
        self.since >= self.params.p as u64
    }

    fn recluster(&mut self, store: &mut Store) -> Result<ClusterIo> {
        self.since = 0;
        self.run_round(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;
    use crate::workload::{Access, OpKind};

    fn store(n: u32) -> Store {
        let mut m = PageMap::new(1000);
        for o in 0..n {
            m.append(Oid(o), 100).unwrap();
        }
        Store::new(m, &SimConfig::default())
    }

    fn rec(oids: &[u32]) -> AccessRecord {
        AccessRecord {
            seq: 0,
            root_oid: Oid(oids[0]),
            op_kind: OpKind::SimpleTraversal,
            accessed: oids.iter().map(|&o| Access::read(Oid(o))).collect(),
        }
    }

    #[test]
    fn chains_become_units() {
        let s = store(100);
        let mut d = Dstc::new(DstcParams::default());
        d.observe(&rec(&[0, 15, 33]), &s);
        d.observe(&rec(&[50, 61]), &s);
        d.observe(&rec(&[70]), &s);
        d.consolidate();
        let mut units = d.units(&s.pages);
        units.iter_mut().for_each(|u| u.sort());
        assert_eq!(units.len(), 2);
        assert!(units.contains(&vec![Oid(0), Oid(15), Oid(33)]));
        assert!(units.contains(&vec![Oid(50), Oid(61)]));
    }

    #[test]
    fn large_components_are_cut_at_page_size() {
        let s = store(100);
        let mut d = Dstc::new(DstcParams::default());
        let chain: Vec<u32> = (0..25).map(|i| i * 3).collect();
        d.observe(&rec(&chain), &s);
        d.consolidate();
        let units = d.units(&s.pages);
        let sizes: Vec<usize> = units.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![10, 10, 5]);
    }

    #[test]
    fn weights_decay_below_threshold() {
        let s = store(100);
        let mut d = Dstc::new(DstcParams::default());
        d.observe(&rec(&[0, 15]), &s);
        d.consolidate();
        assert_eq!(d.units(&s.pages).len(), 1);
        d.consolidate();
        assert!(d.units(&s.pages).is_empty());
    }

    #[test]
    fn every_beneficial_unit_moves_and_pays_reads() {
        let mut s = store(1000);
        let mut d = Dstc::new(DstcParams {
            n: 40,
            p: 40,
            ..Default::default()
        });
        let mut total = ClusterIo::default();
        for t in 0..40u32 {
            let r = rec(&[t * 20, t * 20 + 10]);
            let io = d.after_transaction(&r, &mut s).unwrap();
            total.reads += io.reads;
            total.writes += io.writes;
            total.pages += io.pages;
        }
        // 40 two-object units, each spanning 2 pages: all 80 pages read,
        // 40 units of 200 bytes packed five to a fresh page.
        assert_eq!(total.reads, 80);
        assert_eq!(total.pages, 8);
        assert_eq!(total.writes, 8);
        for t in 0..40 {
            assert_eq!(s.pages.page_of(Oid(t * 20)), s.pages.page_of(Oid(t * 20 + 10)));
        }
        s.pages.check().unwrap();
    }

    #[test]
    fn units_already_on_one_page_stay() {
        let mut s = store(100);
        let mut d = Dstc::new(DstcParams {
            n: 1,
            p: 1,
            ..Default::default()
        });
        let io = d.after_transaction(&rec(&[0, 1, 2]), &mut s).unwrap();
        assert!(!io.ran);
        assert_eq!(s.pages.page_of(Oid(0)), Some(PageId(0)));
    }
}
