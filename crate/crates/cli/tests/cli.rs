use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
NC = 10
NO = 1500
H = [0.5, 1.0]
CLUSTERERS = ["nc", "dro"]
TRANSACTIONS = 300
BUFFER-PAGES = 32
"#;

fn dynobench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynobench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dynobench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn presets_are_listed() {
    let out = ok(&["presets"]);
    assert!(out.lines().any(|l| l == "fig2a"));
}

#[test]
fn gen_writes_a_database() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("out/db.txt");
    ok(&["gen", "--NC", "5", "--NO", "200", "-o", db.to_str().unwrap()]);
    assert!(fs::metadata(&db).unwrap().len() > 0);
}

#[test]
fn trace_then_run_matches_the_generated_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let t = dir.path().join("h1.trace");
    ok(&["trace", "--config", &cfg, "--h", "1", "-o", t.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(&t).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 300);

    let direct = ok(&["run", "--config", &cfg, "--h", "1", "--clusterer", "dro"]);
    let replayed = ok(&[
        "run", "--config", &cfg, "--h", "1", "--clusterer", "dro", "--trace",
        t.to_str().unwrap(),
    ]);
    assert_eq!(direct, replayed);
    assert!(direct.starts_with("H,protocol,clusterer,"));
    assert_eq!(direct.lines().count(), 2);
}

#[test]
fn sweep_and_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("r.csv");
    let plot = dir.path().join("r.tsv");
    ok(&[
        "sweep", "--config", &cfg, "--sequential", "--csv", csv.to_str().unwrap(),
        "--plotdata", plot.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(fs::read_to_string(&plot).unwrap().lines().count(), 5);

    let again = ok(&["report", csv.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(again, text);
    let table = ok(&["report", csv.to_str().unwrap()]);
    assert!(table.starts_with("clusterer"));

    let piped = ok(&["sweep", "--config", &cfg, "--clusterer", "nc"]);
    assert_eq!(piped.lines().count(), 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "NOT-A-KEY = 1\n").unwrap();
    let out = dynobench(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOT-A-KEY"));

    let out = dynobench(&["run", "--preset", "no-such-preset"]);
    assert!(!out.status.success());
    let out = dynobench(&["run", "--clusterer", "bogus", "--config", &small_config(dir.path())]);
    assert!(!out.status.success());
}
