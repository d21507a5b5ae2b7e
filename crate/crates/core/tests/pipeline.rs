use std::io::BufReader;

use dynobench::cluster::{ClustererConfig, ClustererKind};
use dynobench::db::{self, Database, SchemaParams};
use dynobench::harness::{self, ExperimentSpec, ReportFormat};
use dynobench::sim::{self, SimConfig};
use dynobench::{config, trace};

fn small(clusterers: Vec<ClustererKind>, h: Vec<f64>) -> ExperimentSpec {
    ExperimentSpec {
        name: "small".into(),
        db: SchemaParams::with_counts(20, 5000),
        sim: SimConfig {
            buffer_pages: 64,
            ..Default::default()
        },
        clusterers,
        transactions: 3000,
        h_values: h,
        ..Default::default()
    }
}

#[test]
fn database_file_roundtrip() {
    let spec = small(vec![ClustererKind::None], vec![1.0]);
    let db = Database::generate(&spec.db, 9).unwrap();
    let mut buf = Vec::new();
    db::write_database(&db, &mut buf).unwrap();
    let back = db::read_database(BufReader::new(&buf[..])).unwrap();
    assert_eq!(back, db);
}

#[test]
fn replaying_a_saved_trace_reproduces_the_cell() {
    let spec = small(vec![ClustererKind::Dro], vec![0.5]);
    let (pages, t) = harness::prepare(&spec, 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.trace");
    trace::write_trace(&t, std::fs::File::create(&path).unwrap()).unwrap();
    let back = trace::read_trace(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.records, t.records);

    let direct = harness::run_cell(&spec, 0.5, ClustererKind::Dro, pages.clone(), &t).unwrap();
    let replayed = harness::run_cell(&spec, 0.5, ClustererKind::Dro, pages, &back).unwrap();
    assert_eq!(direct.metrics, replayed.metrics);
    let swept = harness::run_experiment(&spec).unwrap();
    assert_eq!(swept.rows[0].metrics, direct.metrics);
}

#[test]
fn every_policy_reorganizes_a_drifting_workload() {
    let spec = small(ClustererKind::ALL.to_vec(), vec![1.0]);
    let (pages, t) = harness::prepare(&spec, 1.0).unwrap();
    for kind in ClustererKind::ALL {
        let cfg = ClustererConfig {
            kind,
            ..spec.cluster.clone()
        };
        let mut c = cfg.build().unwrap();
        let (m, store) = sim::run_trace(&t, pages.clone(), &spec.sim, c.as_mut()).unwrap();
        store.pages.check().unwrap();
        assert_eq!(store.pages.object_count(), pages.object_count());
        if kind == ClustererKind::None {
            assert_eq!(m.recluster_rounds, 0);
        } else {
            assert!(m.recluster_rounds > 0, "{kind} never reorganized");
        }
    }
}

#[test]
fn dstc_is_not_bounded_like_opcf() {
    let spec = small(vec![ClustererKind::DstcLike, ClustererKind::OpcfGp], vec![1.0]);
    let (pages, t) = harness::prepare(&spec, 1.0).unwrap();
    let run = |kind| {
        let cfg = ClustererConfig {
            kind,
            ..spec.cluster.clone()
        };
        let mut c = cfg.build().unwrap();
        sim::run_trace(&t, pages.clone(), &spec.sim, c.as_mut()).unwrap().0
    };
    let nri = spec.cluster.opcf.nri as u64;
    let dstc = run(ClustererKind::DstcLike);
    let gp = run(ClustererKind::OpcfGp);
    assert!(gp.max_round_pages <= nri);
    assert!(
        dstc.max_round_pages > nri,
        "DSTC wrote at most {} pages in a round",
        dstc.max_round_pages
    );
}

/// Transaction reads per record, and the index of the first record after
/// which the placement was reorganized.
fn replay(
    spec: &ExperimentSpec,
    kind: ClustererKind,
    pages: &dynobench::sim::PageMap,
    t: &trace::AccessTrace,
) -> (Vec<u64>, Option<usize>) {
    let cfg = ClustererConfig {
        kind,
        ..spec.cluster.clone()
    };
    let mut c = cfg.build().unwrap();
    let mut store = sim::Store::new(pages.clone(), &spec.sim);
    let mut first = None;
    let reads = t
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let (misses, _) = sim::apply_record(&mut store, rec).unwrap();
            if c.after_transaction(rec, &mut store).unwrap().ran && first.is_none() {
                first = Some(i);
            }
            misses
        })
        .collect();
    (reads, first)
}

#[test]
fn clustering_a_static_hot_set_never_costs_transaction_reads() {
    // The hot region does not move within the run.
    let h = 1e-6;
    let spec = small(ClustererKind::ALL.to_vec(), vec![h]);
    let (pages, t) = harness::prepare(&spec, h).unwrap();
    let (base, _) = replay(&spec, ClustererKind::None, &pages, &t);
    for kind in &ClustererKind::ALL[1..] {
        let (reads, first) = replay(&spec, *kind, &pages, &t);
        let from = first.expect("a static hot set is worth clustering") + 1;
        let after: u64 = reads[from..].iter().sum();
        let none: u64 = base[from..].iter().sum();
        assert!(after <= none, "{kind}: {after} transaction reads against {none}");
    }
}

#[test]
fn configured_sweep_reports_in_every_format() {
    let text = r#"
        NC = 10
        NO = 1500
        H = [0.25, 1.0]
        CLUSTERERS = ["nc", "gp"]
        TRANSACTIONS = 400
        BUFFER-PAGES = 32
        SEED = 3
    "#;
    let spec = config::parse(text).unwrap();
    let r = harness::run_experiment(&spec).unwrap();
    assert_eq!(r.rows.len(), 4);
    let csv = harness::report(&r, ReportFormat::Csv).unwrap();
    assert_eq!(harness::parse_csv(&csv).unwrap(), {
        let mut rows = r.rows.clone();
        for row in &mut rows {
            let m = row.metrics;
            row.metrics = dynobench::sim::SimMetrics {
                txn_read_io: m.txn_read_io,
                clust_read_io: m.clust_read_io,
                clust_write_io: m.clust_write_io,
                total_io: m.total_io,
                buffer_hits: m.buffer_hits,
                ..Default::default()
            };
            row.fallbacks = 0;
        }
        rows
    });
    let table = harness::report(&r, ReportFormat::Table).unwrap();
    assert_eq!(table.lines().count(), 5);
    let plot = harness::report(&r, ReportFormat::Plotdata).unwrap();
    assert!(plot.lines().any(|l| l.starts_with("gp\t-2\t")));
}

#[test]
fn every_preset_loads_and_validates() {
    for name in harness::PRESETS {
        let spec = harness::preset(name).unwrap();
        spec.validate().unwrap();
        assert_eq!(config::load(None, Some(name)).unwrap(), spec);
    }
}
