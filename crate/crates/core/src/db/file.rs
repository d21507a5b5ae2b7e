//! Line-based database file.
//!
//! ```text
//! ocb-db  1
//! params  NC=50  MAXNREF=10  BASESIZE=50  NO=20000  NREFT=4  ATTRANGE=1  CLOCREF=50  OLOCREF=20000  SEED=42
//! class   <id> <maxnref> <basesize> <instance_size> <target:type,...>
//! object  <oid> <class_id> <filler_size> <target:type;...> <attr,...> [deleted]
//! ```
//!
//! Fields are tab-separated; empty lists are written as `-`. Back-references
//! and class iterators are rebuilt on load.

use std::io::{BufRead, Write};

use super::{install_backrefs, ClassSpec, Database, ObjectInstance, Ref, SchemaParams};
use crate::error::{Error, Result};
use crate::ids::{ClassId, Oid, RefType};

pub const DB_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ocb-db";

pub fn write_database<W: Write>(db: &Database, mut out: W) -> Result<()> {
    let p = &db.params;
    writeln!(out, "{MAGIC}\t{DB_FORMAT_VERSION}")?;
    write!(
        out,
        "params\tNC={}\tMAXNREF={}\tBASESIZE={}\tNO={}\tNREFT={}\tATTRANGE={}\tCLOCREF={}\tOLOCREF={}\tSEED={}",
        p.nc, p.maxnref, p.basesize, p.no, p.nreft, p.attrange, p.clocref, p.olocref, db.rng_seed
    )?;
    if let Some(t) = &p.maxnref_table {
        write!(out, "\tMAXNREF-TABLE={}", join(t.iter(), ","))?;
    }
    if let Some(t) = &p.basesize_table {
        write!(out, "\tBASESIZE-TABLE={}", join(t.iter(), ","))?;
    }
    writeln!(out)?;
    for c in &db.classes {
        let refs = join(
            c.crefs.iter().map(|r| format!("{}:{}", r.target, r.ref_type)),
            ",",
        );
        writeln!(
            out,
            "class\t{}\t{}\t{}\t{}\t{}",
            c.class_id, c.maxnref, c.basesize, c.instance_size, refs
        )?;
    }
    for o in &db.objects {
        let refs = join(
            o.orefs.iter().map(|r| format!("{}:{}", r.target, r.ref_type)),
            ";",
        );
        let attrs = join(o.attributes.iter(), ",");
        write!(
            out,
            "object\t{}\t{}\t{}\t{}\t{}",
            o.oid, o.class_id, o.filler_size, refs, attrs
        )?;
        if o.deleted {
            write!(out, "\tdeleted")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn join<I, T>(items: I, sep: &str) -> String
where
    I: IntoIterator<Item = T>,
    T: ToString,
{
    let s: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    if s.is_empty() {
        "-".to_string()
    } else {
        s.join(sep)
    }
}

fn num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what}: `{s}`")))
}

fn list<T, F>(s: &str, sep: char, line: usize, mut f: F) -> Result<Vec<T>>
where
    F: FnMut(&str, usize) -> Result<T>,
{
    if s == "-" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(sep).map(|x| f(x, line)).collect()
}

fn typed_ref(s: &str, line: usize) -> Result<(u32, u8)> {
    let (t, ty) = s
        .split_once(':')
        .ok_or_else(|| Error::parse(line, format!("bad reference `{s}`")))?;
    Ok((num(t, line, "reference target")?, num(ty, line, "reference type")?))
}

pub fn read_database<R: BufRead>(input: R) -> Result<Database> {
    let mut params: Option<SchemaParams> = None;
    let mut seed = 0u64;
    let mut classes: Vec<ClassSpec> = Vec::new();
    let mut objects: Vec<ObjectInstance> = Vec::new();
    let mut saw_magic = false;

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            MAGIC => {
                let v: u32 = num(fields.get(1).copied().unwrap_or(""), lineno, "version")?;
                if v != DB_FORMAT_VERSION {
                    return Err(Error::parse(lineno, format!("unsupported version {v}")));
                }
                saw_magic = true;
            }
            "params" => {
                let mut p = SchemaParams::default();
                for kv in &fields[1..] {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::parse(lineno, format!("bad param `{kv}`")))?;
                    match k {
                        "NC" => p.nc = num(v, lineno, k)?,
                        "MAXNREF" => p.maxnref = num(v, lineno, k)?,
                        "BASESIZE" => p.basesize = num(v, lineno, k)?,
                        "NO" => p.no = num(v, lineno, k)?,
                        "NREFT" => p.nreft = num(v, lineno, k)?,
                        "ATTRANGE" => p.attrange = num(v, lineno, k)?,
                        "CLOCREF" => p.clocref = num(v, lineno, k)?,
                        "OLOCREF" => p.olocref = num(v, lineno, k)?,
                        "SEED" => seed = num(v, lineno, k)?,
                        "MAXNREF-TABLE" => {
                            p.maxnref_table = Some(list(v, ',', lineno, |x, l| num(x, l, k))?)
                        }
                        "BASESIZE-TABLE" => {
                            p.basesize_table = Some(list(v, ',', lineno, |x, l| num(x, l, k))?)
                        }
                        _ => return Err(Error::parse(lineno, format!("unknown param `{k}`"))),
                    }
                }
                params = Some(p);
            }
            "class" => {
                if fields.len() != 6 {
                    return Err(Error::parse(lineno, "class record needs 6 fields"));
                }
                let id: u32 = num(fields[1], lineno, "class id")?;
                if id as usize != classes.len() {
                    return Err(Error::parse(lineno, "class ids must be dense and ordered"));
                }
                let crefs = list(fields[5], ',', lineno, |x, l| {
                    typed_ref(x, l).map(|(t, ty)| Ref {
                        target: ClassId(t),
                        ref_type: RefType(ty),
                    })
                })?;
                classes.push(ClassSpec {
                    class_id: ClassId(id),
                    maxnref: num(fields[2], lineno, "maxnref")?,
                    basesize: num(fields[3], lineno, "basesize")?,
                    instance_size: num(fields[4], lineno, "instance size")?,
                    crefs,
                    iterator: Vec::new(),
                });
            }
            "object" => {
                if fields.len() < 6 {
                    return Err(Error::parse(lineno, "object record needs 6 fields"));
                }
                let oid: u32 = num(fields[1], lineno, "oid")?;
                if oid as usize != objects.len() {
                    return Err(Error::parse(lineno, "oids must be dense and ordered"));
                }
                let orefs = list(fields[4], ';', lineno, |x, l| {
                    typed_ref(x, l).map(|(t, ty)| Ref {
                        target: Oid(t),
                        ref_type: RefType(ty),
                    })
                })?;
                objects.push(ObjectInstance {
                    oid: Oid(oid),
                    class_id: ClassId(num(fields[2], lineno, "class id")?),
                    filler_size: num(fields[3], lineno, "filler size")?,
                    orefs,
                    backrefs: Vec::new(),
                    attributes: list(fields[5], ',', lineno, |x, l| num(x, l, "attribute"))?,
                    deleted: fields.get(6) == Some(&"deleted"),
                });
            }
            other => return Err(Error::parse(lineno, format!("unknown record `{other}`"))),
        }
    }

    if !saw_magic {
        return Err(Error::parse(1, "missing ocb-db header"));
    }
    let params = params.ok_or_else(|| Error::parse(0, "missing params record"))?;
    for o in &objects {
        let c = o.class_id.index();
        if c >= classes.len() {
            return Err(Error::parse(0, format!("object {} has unknown class", o.oid)));
        }
        if o.orefs.iter().any(|r| r.target.index() >= objects.len()) {
            return Err(Error::parse(0, format!("object {} has dangling reference", o.oid)));
        }
        if !o.deleted {
            classes[c].iterator.push(o.oid);
        }
    }
    install_backrefs(&mut objects);
    Ok(Database {
        params,
        classes,
        objects,
        rng_seed: seed,
    })
}
