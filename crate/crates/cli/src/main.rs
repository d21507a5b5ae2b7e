use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dynobench::cluster::ClustererKind;
use dynobench::db::{self, Database};
use dynobench::harness::{self, ExperimentSpec, ReportFormat, SweepResult};
use dynobench::{config, trace};

#[derive(Parser)]
#[command(name = "dynobench", version, about = "Workload-dynamics benchmark for object stores")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file using the benchmark's parameter names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named experiment to start from (see `presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let text = match &self.config {
            Some(p) => Some(
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            ),
            None => None,
        };
        let mut spec = config::load(text.as_deref(), self.preset.as_deref())?;
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a database and write it to a file.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long = "NC")]
        nc: Option<u32>,
        #[arg(long = "MAXNREF")]
        maxnref: Option<u32>,
        #[arg(long = "BASESIZE")]
        basesize: Option<u32>,
        #[arg(long = "NO")]
        no: Option<u32>,
        #[arg(long = "NREFT")]
        nreft: Option<u8>,
        #[arg(long = "ATTRANGE")]
        attrange: Option<u32>,
        #[arg(long = "CLOCREF")]
        clocref: Option<u32>,
        #[arg(long = "OLOCREF")]
        olocref: Option<u32>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Drive the root-selection protocol and write the access trace.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Rate of change; defaults to the largest configured H.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        transactions: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate one (H, clusterer) cell.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value = "nc")]
        clusterer: String,
        /// Replay this trace instead of generating one.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Metrics CSV; standard output when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run every configured (H, clusterer) cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Restrict to these clusterers (repeatable).
        #[arg(long)]
        clusterer: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plotdata: Option<PathBuf>,
        /// Run the cells on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Re-render a metrics CSV.
    Report {
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the named experiments.
    Presets,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pick_h(spec: &ExperimentSpec, h: Option<f64>) -> f64 {
    h.unwrap_or_else(|| spec.h_values.iter().copied().fold(f64::MIN, f64::max))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen {
            common,
            nc,
            maxnref,
            basesize,
            no,
            nreft,
            attrange,
            clocref,
            olocref,
            output,
        } => {
            let spec = common.spec()?;
            let mut p = spec.db.clone();
            if let Some(v) = nc {
                p.nc = v;
                p.clocref = v;
            }
            if let Some(v) = no {
                p.no = v;
                p.olocref = v;
            }
            p.maxnref = maxnref.unwrap_or(p.maxnref);
            p.basesize = basesize.unwrap_or(p.basesize);
            p.nreft = nreft.unwrap_or(p.nreft);
            p.attrange = attrange.unwrap_or(p.attrange);
            p.clocref = clocref.unwrap_or(p.clocref);
            p.olocref = olocref.unwrap_or(p.olocref);
            let size_tables = p.maxnref_table.is_some() || p.basesize_table.is_some();
            if size_tables && nc.is_some_and(|n| n != spec.db.nc) {
                p.maxnref_table = None;
                p.basesize_table = None;
            }
            let database = Database::generate(&p, spec.seed)?;
            let mut w = create(&output)?;
            db::write_database(&database, &mut w)?;
            w.flush()?;
            eprintln!(
                "{} objects, {} filler bytes -> {}",
                database.live_count(),
                database.total_filler_bytes(),
                output.display()
            );
        }
        Cmd::Trace {
            common,
            h,
            transactions,
            output,
        } => {
            let mut spec = common.spec()?;
            if let Some(t) = transactions {
                spec.transactions = t;
            }
            let h = pick_h(&spec, h);
            let t = harness::trace_only(&spec, h)?;
            let mut w = create(&output)?;
            trace::write_trace(&t, &mut w)?;
            w.flush()?;
            eprintln!("{} transactions, {} accesses -> {}", t.len(), t.total_accesses(), output.display());
        }
        Cmd::Run {
            common,
            h,
            clusterer,
            trace: trace_path,
            csv,
        } => {
            let spec = common.spec()?;
            spec.validate()?;
            let h = pick_h(&spec, h);
            let kind = ClustererKind::parse(&clusterer)?;
            let (pages, generated) = harness::prepare(&spec, h)?;
            let t = match trace_path {
                Some(p) => {
                    let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                    trace::read_trace(BufReader::new(f))?
                }
                None => generated,
            };
            let row = harness::run_cell(&spec, h, kind, pages, &t)?;
            emit(csv.as_deref(), &harness::format_csv(&[row]))?;
        }
        Cmd::Sweep {
            common,
            clusterer,
            csv,
            plotdata,
            sequential,
        } => {
            let mut spec = common.spec()?;
            if !clusterer.is_empty() {
                spec.clusterers = clusterer
                    .iter()
                    .map(|c| ClustererKind::parse(c))
                    .collect::<Result<_, _>>()?;
            }
            if sequential {
                spec.parallel = false;
            }
            let result = harness::run_experiment(&spec)?;
            if let Some(p) = &plotdata {
                emit(Some(p), &harness::report(&result, ReportFormat::Plotdata)?)?;
            }
            match &csv {
                Some(p) => {
                    emit(Some(p), &harness::report(&result, ReportFormat::Csv)?)?;
                    eprint!("{}", harness::report(&result, ReportFormat::Table)?);
                }
                None => emit(None, &harness::report(&result, ReportFormat::Csv)?)?,
            }
        }
        Cmd::Report {
            input,
            format,
            output,
        } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let rows = harness::parse_csv(&text)?;
            if rows.is_empty() {
                bail!("{} has no rows", input.display());
            }
            let result = SweepResult {
                name: input.display().to_string(),
                seed: 0,
                config_hash: 0,
                rows,
            };
            let fmt = ReportFormat::parse(&format)?;
            emit(output.as_deref(), &harness::report(&result, fmt)?)?;
        }
        Cmd::Presets => {
            for p in harness::PRESETS {
                println!("{p}");
            }
        }
    }
    Ok(())
}
