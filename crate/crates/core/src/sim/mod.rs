//! Trace-driven paged store: sequential placement, an LRU or CLOCK buffer,
//! and I/O accounting.
//!
//! Total I/O is transaction reads plus clustering reads and writes.
//! Transaction writes only dirty pages; flushing those on eviction is
//! counted in [`SimMetrics::txn_write_io`], outside the total.

mod buffer;
mod pagemap;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterIo, Clusterer};
use crate::db::Database;
use crate::error::{Error, Result};
use crate::ids::{Oid, PageId};
use crate::trace::AccessTrace;
use crate::workload::{AccessMode, AccessRecord, OpKind};

pub use buffer::{Buffer, Probe, Replacement};
pub use pagemap::{first_fit, Page, PageMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Sequential,
}

impl Placement {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" => Ok(Placement::Sequential),
            _ => Err(Error::config(format!("unknown placement `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub page_size: u32,
    pub buffer_pages: usize,
    pub replacement: Replacement,
    pub multiprogramming: u32,
    pub placement: Placement,
}

impl Default for SimConfig {
    /// 4 KB pages, a 4 MB LRU buffer, sequential placement.
    fn default() -> Self {
        SimConfig {
            page_size: 4096,
            buffer_pages: 1024,
            replacement: Replacement::Lru,
            multiprogramming: 1,
            placement: Placement::Sequential,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.page_size == 0 {
            return Err(Error::config("PAGE-SIZE must be positive"));
        }
        if self.buffer_pages == 0 {
            return Err(Error::config("buffer must hold at least one page"));
        }
        if self.multiprogramming != 1 {
            return Err(Error::config(format!(
                "multiprogramming level {} is not supported; only 1",
                self.multiprogramming
            )));
        }
        Ok(())
    }

    pub fn place(&self, db: &Database) -> Result<PageMap> {
        self.validate()?;
        match self.placement {
            Placement::Sequential => PageMap::place_sequential(db, self.page_size),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub txn_read_io: u64,
    pub clust_read_io: u64,
    pub clust_write_io: u64,
    pub total_io: u64,
    pub buffer_hits: u64,
    /// Dirty pages flushed on eviction; not part of `total_io`.
    pub txn_write_io: u64,
    pub recluster_rounds: u64,
    pub pages_reclustered: u64,
    pub max_round_pages: u64,
}

impl SimMetrics {
    fn add_cluster(&mut self, io: &ClusterIo) {
        self.clust_read_io += io.reads;
        self.clust_write_io += io.writes;
        if io.ran {
            self.recluster_rounds += 1;
            self.pages_reclustered += io.pages;
            self.max_round_pages = self.max_round_pages.max(io.pages);
        }
    }

    fn finish(&mut self) {
        self.total_io = self.txn_read_io + self.clust_read_io + self.clust_write_io;
    }
}

/// Placement plus buffer: the state a clusterer may inspect and reorganize.
#[derive(Debug, Clone)]
pub struct Store {
    pub pages: PageMap,
    pub buffer: Buffer,
    /// Evictions of pages dirtied by transactions.
    pub dirty_flushes: u64,
    /// Dirty pages whose flush was already charged to clustering.
    prepaid: HashSet<PageId>,
}

impl Store {
    pub fn new(pages: PageMap, cfg: &SimConfig) -> Store {
        Store {
            pages,
            buffer: Buffer::new(cfg.buffer_pages, cfg.replacement),
            dirty_flushes: 0,
            prepaid: HashSet::new(),
        }
    }

    fn touch(&mut self, pid: PageId) -> Probe {
        let (probe, flushed) = self.buffer.probe_flush(pid);
        if flushed {
            let victim = match probe {
                Probe::Miss { evicted: Some(v) } => v,
                _ => unreachable!("a flush needs a victim"),
            };
            if !self.prepaid.remove(&victim) {
                self.dirty_flushes += 1;
            }
        }
        probe
    }

    /// Brings a page into the buffer. Returns true when that took a read.
    pub fn fetch(&mut self, pid: PageId) -> bool {
        !self.touch(pid).is_hit()
    }

    /// Accounts for writing a page produced by clustering. Under write-back
    /// the page is written once when it leaves the buffer: a page already
    /// dirty costs nothing now, any other page is charged one write up
    /// front and stays resident and dirty until evicted.
    pub fn write_back(&mut self, pid: PageId) -> u64 {
        if self.buffer.is_dirty(pid) {
            self.touch(pid);
            return 0;
        }
        self.touch(pid);
        self.buffer.mark_dirty(pid);
        self.prepaid.insert(pid);
        1
    }
}

fn resolve(store: &mut Store, oid: Oid, rec: &AccessRecord) -> Result<PageId> {
    if let Some(pid) = store.pages.page_of(oid) {
        return Ok(pid);
    }
    if rec.op_kind == OpKind::DatabaseEvolution {
        let size = store.pages.default_size();
        return store.pages.append(oid, size);
    }
    Err(Error::Trace(format!(
        "record {}: object {oid} is not placed",
        rec.seq
    )))
}

/// Replays one record against the store, returning its read misses and hits.
pub fn apply_record(store: &mut Store, rec: &AccessRecord) -> Result<(u64, u64)> {
    let (mut misses, mut hits) = (0, 0);
    for a in &rec.accessed {
        let pid = resolve(store, a.oid, rec)?;
        if store.fetch(pid) {
            misses += 1;
        } else {
            hits += 1;
        }
        if a.mode == AccessMode::Write {
            store.buffer.mark_dirty(pid);
        }
    }
    Ok((misses, hits))
}

/// Replays a trace. After each record the clusterer observes it and may
/// reorganize the store.
pub fn run_trace(
    trace: &AccessTrace,
    pages: PageMap,
    cfg: &SimConfig,
    clusterer: &mut dyn Clusterer,
) -> Result<(SimMetrics, Store)> {
    cfg.validate()?;
    let mut store = Store::new(pages, cfg);
    let mut m = SimMetrics::default();
    for rec in &trace.records {
        let (misses, hits) = apply_record(&mut store, rec)?;
        m.txn_read_io += misses;
        m.buffer_hits += hits;
        let io = clusterer.after_transaction(rec, &mut store)?;
        m.add_cluster(&io);
    }
    m.txn_write_io = store.dirty_flushes;
    m.finish();
    Ok((m, store))
}
