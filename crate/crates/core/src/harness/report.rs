use std::fmt::Write as _;

use super::{CellResult, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "H,protocol,clusterer,txn_read_io,clust_read_io,clust_write_io,total_io,buffer_hits";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
    Plotdata,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            "plotdata" | "plot" | "tsv" => Ok(ReportFormat::Plotdata),
            _ => Err(Error::config(format!("unknown report format `{s}`"))),
        }
    }
}

fn csv_row(r: &CellResult) -> String {
    let m = &r.metrics;
    format!(
        "{},{},{},{},{},{},{},{}",
        r.h,
        r.protocol,
        r.clusterer,
        m.txn_read_io,
        m.clust_read_io,
        m.clust_write_io,
        m.total_io,
        m.buffer_hits
    )
}

/// Header plus one row per cell, in result order.
pub fn format_csv(rows: &[CellResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

fn sorted_by_clusterer(rows: &[CellResult]) -> Vec<&CellResult> {
    let mut v: Vec<&CellResult> = rows.iter().collect();
    v.sort_by(|a, b| a.clusterer.cmp(&b.clusterer).then(a.h.total_cmp(&b.h)));
    v
}

/// Aligned text table, ordered by clusterer then H.
pub fn format_table(rows: &[CellResult]) -> String {
    let header = [
        "clusterer", "H", "protocol", "txn_read", "clust_read", "clust_write", "total_io", "hits",
    ];
    let body: Vec<[String; 8]> = sorted_by_clusterer(rows)
        .into_iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.clusterer.to_string(),
                r.h.to_string(),
                r.protocol.clone(),
                m.txn_read_io.to_string(),
                m.clust_read_io.to_string(),
                m.clust_write_io.to_string(),
                m.total_io.to_string(),
                m.buffer_hits.to_string(),
            ]
        })
        .collect();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 3 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for row in &body {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Tab-separated `(log2 H, total_io)` series, one block per clusterer.
pub fn format_plotdata(rows: &[CellResult]) -> String {
    let mut out = String::from("clusterer\tlog2_h\ttotal_io\n");
    for r in sorted_by_clusterer(rows) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            r.clusterer,
            r.h.log2(),
            r.metrics.total_io
        );
    }
    out
}

pub fn report(result: &SweepResult, format: ReportFormat) -> Result<String> {
    if result.rows.is_empty() {
        return Err(Error::config("nothing to report: the result has no rows"));
    }
    Ok(match format {
        ReportFormat::Csv => format_csv(&result.rows),
        ReportFormat::Table => format_table(&result.rows),
        ReportFormat::Plotdata => format_plotdata(&result.rows),
    })
}

/// Reads rows back from [`format_csv`] output.
pub fn parse_csv(text: &str) -> Result<Vec<CellResult>> {
    use crate::cluster::ClustererKind;
    use crate::sim::SimMetrics;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, "missing metrics header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(i + 1, "expected 8 fields"));
        }
        let num = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::parse(i + 1, format!("bad count `{s}`")))
        };
        let metrics = SimMetrics {
            txn_read_io: num(f[3])?,
            clust_read_io: num(f[4])?,
            clust_write_io: num(f[5])?,
            total_io: num(f[6])?,
            buffer_hits: num(f[7])?,
            ..Default::default()
        };
        rows.push(CellResult {
            h: f[0]
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad H `{}`", f[0])))?,
            protocol: f[1].to_string(),
            clusterer: ClustererKind::parse(f[2]).map_err(|e| Error::parse(i + 1, e.to_string()))?,
            metrics,
            fallbacks: 0,
        });
    }
    Ok(rows)
}
