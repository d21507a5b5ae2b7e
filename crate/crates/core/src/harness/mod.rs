//! Experiment orchestration: build the database, drive the protocol to
//! produce a trace, replay it under each clusterer, and collect one metrics
//! row per `(H, clusterer)` cell.

mod preset;
mod report;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClustererConfig, ClustererKind};
use crate::db::{Database, SchemaParams};
use crate::error::{Error, Result};
use crate::protocol::{DependencyKind, ProtocolConfig, ProtocolState};
use crate::rng;
use crate::sim::{self, PageMap, SimConfig, SimMetrics};
use crate::trace::AccessTrace;
use crate::workload::{self, WorkloadParams};

pub use preset::{preset, PRESETS};
pub use report::{
    format_csv, format_plotdata, format_table, parse_csv, report, ReportFormat, CSV_HEADER,
};

/// `2^-11 ..= 2^0`.
pub fn default_h_grid() -> Vec<f64> {
    (-11..=0).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub db: SchemaParams,
    pub workload: WorkloadParams,
    /// `regional.h_rate` is replaced by each value of `h_values`.
    pub protocol: ProtocolConfig,
    pub sim: SimConfig,
    /// Parameters shared by all clusterers.
    pub cluster: ClustererConfig,
    pub clusterers: Vec<ClustererKind>,
    pub transactions: u64,
    pub h_values: Vec<f64>,
    pub seed: u64,
    /// Run cells on several threads. Results do not depend on it.
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "custom".into(),
            db: SchemaParams::default(),
            workload: WorkloadParams::default(),
            protocol: ProtocolConfig::default(),
            sim: SimConfig::default(),
            cluster: ClustererConfig::default(),
            clusterers: vec![ClustererKind::None],
            transactions: 10_000,
            h_values: default_h_grid(),
            seed: 42,
            parallel: true,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() {
            return Err(Error::config("h_values must not be empty"));
        }
        if self.transactions == 0 {
            return Err(Error::config("transactions must be at least 1"));
        }
        if self.clusterers.is_empty() {
            return Err(Error::config("at least one clusterer is needed"));
        }
        for &h in &self.h_values {
            crate::protocol::change_interval(h)?;
        }
        self.db.validate()?;
        self.sim.validate()?;
        self.cluster.validate()?;
        Ok(())
    }

    /// Protocol configuration with H set to `h`.
    pub fn protocol_at(&self, h: f64) -> ProtocolConfig {
        let mut p = self.protocol.clone();
        p.regional.h_rate = h;
        p
    }

    /// Label of the root-selection setup used in reports.
    pub fn protocol_label(&self) -> String {
        let regional = self.protocol.regional.protocol.as_str();
        let Some(dep) = &self.protocol.dependency else {
            return regional.to_string();
        };
        let names = [
            (DependencyKind::Random, "random"),
            (DependencyKind::SRef, "sref"),
            (DependencyKind::DRef, "dref"),
            (DependencyKind::Traversed, "traversed"),
            (DependencyKind::SameClass, "class"),
        ];
        let weights = [
            dep.mix.random,
            dep.mix.sref,
            dep.mix.dref,
            dep.mix.traversed,
            dep.mix.class,
        ];
        let kinds: Vec<&str> = names
            .iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|((_, n), _)| *n)
            .collect();
        let mut label = format!("hybrid-{}", kinds.join("+"));
        if dep.integration {
            label.push('@');
            label.push_str(regional);
        }
        label
    }

    /// FNV hash of the full specification, for provenance.
    pub fn config_hash(&self) -> u64 {
        rng::label(&format!("{self:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub h: f64,
    pub protocol: String,
    pub clusterer: ClustererKind,
    pub metrics: SimMetrics,
    /// Dependency selections that fell back to the random function.
    pub fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub seed: u64,
    pub config_hash: u64,
    pub rows: Vec<CellResult>,
}

impl SweepResult {
    pub fn row(&self, h: f64, clusterer: ClustererKind) -> Option<&CellResult> {
        self.rows
            .iter()
            .find(|r| r.h == h && r.clusterer == clusterer)
    }

    /// Total I/O of one clusterer across H, in ascending H.
    pub fn series(&self, clusterer: ClustererKind) -> Vec<(f64, u64)> {
        let mut s: Vec<(f64, u64)> = self
            .rows
            .iter()
            .filter(|r| r.clusterer == clusterer)
            .map(|r| (r.h, r.metrics.total_io))
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    }
}

/// Seed of the trace stream for one H. Every clusterer replays the same
/// trace.
fn trace_seed(seed: u64, h: f64) -> u64 {
    rng::derive_seed(seed, &[rng::label("trace"), h.to_bits()])
}

/// Drives the protocol for `transactions` roots, executing the workload on
/// each. `seed` fixes the protocol's structure (region membership,
/// D-references); `stream_seed` the draws. The database changes only under
/// `database_evolution`.
pub fn generate_trace(
    db: &mut Database,
    protocol: &ProtocolConfig,
    wl: &WorkloadParams,
    transactions: u64,
    seed: u64,
    stream_seed: u64,
) -> Result<AccessTrace> {
    let mut state = ProtocolState::new(protocol, db, wl.op_kind, seed)?;
    let mut r = rng::stream(stream_seed, &[rng::label("roots")]);
    let mut trace = AccessTrace::default();
    for seq in 0..transactions {
        let root = state.next_root(db, &mut r)?;
        let rec = workload::execute_mut(db, root, wl, seq, &mut r)?;
        state.observe(&rec);
        trace.records.push(rec);
    }
    trace
        .meta
        .insert("dependency_fallbacks".into(), state.fallbacks.to_string());
    trace
        .meta
        .insert("change_iterations".into(), state.regional.iterations.to_string());
    Ok(trace)
}

/// Fresh database, initial placement and trace for one H.
pub fn prepare(spec: &ExperimentSpec, h: f64) -> Result<(PageMap, AccessTrace)> {
    let mut db = Database::generate(&spec.db, spec.seed)?;
    let pages = spec.sim.place(&db)?;
    let trace = generate_trace(
        &mut db,
        &spec.protocol_at(h),
        &spec.workload,
        spec.transactions,
        spec.seed,
        trace_seed(spec.seed, h),
    )?;
    Ok((pages, trace))
}

/// Replays a prepared trace under one clusterer.
pub fn run_cell(
    spec: &ExperimentSpec,
    h: f64,
    kind: ClustererKind,
    pages: PageMap,
    trace: &AccessTrace,
) -> Result<CellResult> {
    let cfg = ClustererConfig {
        kind,
        ..spec.cluster.clone()
    };
    let mut clusterer = cfg.build()?;
    let (metrics, _) = sim::run_trace(trace, pages, &spec.sim, clusterer.as_mut())?;
    let fallbacks = trace
        .meta
        .get("dependency_fallbacks")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    Ok(CellResult {
        h,
        protocol: spec.protocol_label(),
        clusterer: kind,
        metrics,
        fallbacks,
    })
}

fn run_h(spec: &ExperimentSpec, h: f64) -> Result<Vec<CellResult>> {
    let (pages, trace) = prepare(spec, h)?;
    spec.clusterers
        .iter()
        .map(|&k| run_cell(spec, h, k, pages.clone(), &trace))
        .collect()
}

/// Runs every `(H, clusterer)` cell. Cells sharing an H replay the same
/// trace over their own copy of the initial placement.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let per_h: Vec<Result<Vec<CellResult>>> = if spec.parallel {
        let workers = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(spec.h_values.len());
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<Vec<CellResult>>>>> =
            spec.h_values.iter().map(|_| Default::default()).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= spec.h_values.len() {
                        break;
                    }
                    let r = run_h(spec, spec.h_values[i]);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
            .collect()
    } else {
        spec.h_values.iter().map(|&h| run_h(spec, h)).collect()
    };
    let mut rows = Vec::new();
    for r in per_h {
        rows.extend(r?);
    }
    Ok(SweepResult {
        name: spec.name.clone(),
        seed: spec.seed,
        config_hash: spec.config_hash(),
        rows,
    })
}

/// Convenience for a single workload-only run: the trace of one H.
pub fn trace_only(spec: &ExperimentSpec, h: f64) -> Result<AccessTrace> {
    prepare(spec, h).map(|(_, t)| t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            db: SchemaParams::with_counts(10, 2000),
            sim: SimConfig {
                buffer_pages: 32,
                ..Default::default()
            },
            transactions: 300,
            h_values: vec![1.0],
            ..Default::default()
        }
    }

    #[test]
    fn one_cell_without_clustering() {
        let r = run_experiment(&small()).unwrap();
        assert_eq!(r.rows.len(), 1);
        let m = r.rows[0].metrics;
        assert_eq!(m.clust_read_io + m.clust_write_io, 0);
        assert_eq!(m.total_io, m.txn_read_io);
    }

    #[test]
    fn sweeps_are_deterministic_and_thread_independent() {
        let mut spec = small();
        spec.h_values = vec![0.25, 1.0];
        spec.clusterers = ClustererKind::ALL.to_vec();
        let a = run_experiment(&spec).unwrap();
        spec.parallel = false;
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 10);
    }

    #[test]
    fn default_grid_brackets_the_smallest_rate() {
        let g = default_h_grid();
        assert_eq!(g.len(), 12);
        assert!(g[0] < 0.0006 && g[1] > 0.0006);
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = small();
        spec.h_values.clear();
        assert!(matches!(run_experiment(&spec), Err(Error::Config(_))));
    }
}
