//! Access-trace file: the hand-off between workload generation and the
//! storage simulator.
//!
//! One record per line, `seq,root_oid,op_kind,oid:mode;oid:mode;...`, where
//! `mode` is `r` or `w`. Lines starting with `#` carry metadata
//! (`# key=value`) and are otherwise ignored.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ids::Oid;
use crate::workload::{Access, AccessMode, AccessRecord};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub records: Vec<AccessRecord>,
    /// Free-form metadata written as comment lines, e.g. `dependency_fallbacks`.
    pub meta: BTreeMap<String, String>,
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_accesses(&self) -> usize {
        self.records.iter().map(|r| r.accessed.len()).sum()
    }
}

pub fn format_record(rec: &AccessRecord) -> String {
    let mut s = format!("{},{},{},", rec.seq, rec.root_oid, rec.op_kind);
    for (i, a) in rec.accessed.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let m = match a.mode {
            AccessMode::Read => 'r',
            AccessMode::Write => 'w',
        };
        s.push_str(&format!("{}:{}", a.oid, m));
    }
    s
}

pub fn parse_record(line: &str, lineno: usize) -> Result<AccessRecord> {
    let mut parts = line.splitn(4, ',');
    let mut next = |what: &str| {
        parts
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("missing {what}")))
    };
    let seq = next("seq")?
        .parse()
        .map_err(|_| Error::parse(lineno, "bad seq"))?;
    let root = next("root_oid")?
        .parse()
        .map_err(|_| Error::parse(lineno, "bad root_oid"))?;
    let op_kind = next("op_kind")?
        .parse()
        .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
    let body = next("accesses")?;
    let mut accessed = Vec::new();
    if !body.is_empty() {
        for item in body.split(';') {
            let (oid, mode) = item
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("bad access `{item}`")))?;
            let oid = oid
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad oid `{oid}`")))?;
            let mode = match mode {
                "r" => AccessMode::Read,
                "w" => AccessMode::Write,
                _ => return Err(Error::parse(lineno, format!("bad mode `{mode}`"))),
            };
            accessed.push(Access {
                oid: Oid(oid),
                mode,
            });
        }
    }
    Ok(AccessRecord {
        seq,
        root_oid: Oid(root),
        op_kind,
        accessed,
    })
}

pub fn write_trace<W: Write>(trace: &AccessTrace, mut out: W) -> Result<()> {
    for (k, v) in &trace.meta {
        writeln!(out, "# {k}={v}")?;
    }
    for rec in &trace.records {
        writeln!(out, "{}", format_record(rec))?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<AccessTrace> {
    let mut trace = AccessTrace::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                trace.meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        trace.records.push(parse_record(line, i + 1)?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::OpKind;
    use proptest::prelude::*;

    #[test]
    fn line_format() {
        let rec = AccessRecord {
            seq: 3,
            root_oid: Oid(10),
            op_kind: OpKind::SimpleTraversal,
            accessed: vec![Access::read(Oid(10)), Access::write(Oid(4))],
        };
        assert_eq!(format_record(&rec), "3,10,simple_traversal,10:r;4:w");
        assert_eq!(parse_record("3,10,simple_traversal,10:r;4:w", 1).unwrap(), rec);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_record("1,2", 1).is_err());
        assert!(parse_record("1,2,teleport,3:r", 1).is_err());
        assert!(parse_record("1,2,scan,3:x", 1).is_err());
        assert!(parse_record("1,2,scan,3", 1).is_err());
    }

    fn arb_record() -> impl Strategy<Value = AccessRecord> {
        (
            any::<u64>(),
            any::<u32>(),
            0usize..OpKind::ALL.len(),
            prop::collection::vec((any::<u32>(), any::<bool>()), 0..20),
        )
            .prop_map(|(seq, root, k, acc)| AccessRecord {
                seq,
                root_oid: Oid(root),
                op_kind: OpKind::ALL[k],
                accessed: acc
                    .into_iter()
                    .map(|(o, w)| if w { Access::write(Oid(o)) } else { Access::read(Oid(o)) })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn roundtrip(records in prop::collection::vec(arb_record(), 0..30), fallbacks in any::<u32>()) {
            let mut trace = AccessTrace { records, ..Default::default() };
            trace.meta.insert("dependency_fallbacks".into(), fallbacks.to_string());
            let mut buf = Vec::new();
            write_trace(&trace, &mut buf).unwrap();
            prop_assert_eq!(read_trace(buf.as_slice()).unwrap(), trace);
        }
    }
}
