//! TOML configuration using the benchmark's parameter names.
//!
//! Top-level keys cover the database (`NC`, `MAXNREF`, ...), the workload
//! (`OPERATION`, `DEPTH`, ...), root selection (`PROTOCOL`, `H`, `HR-SIZE`,
//! `SREF-DEP-PROB`, ...), the simulator (`BUFFER-PAGES`, `REPLACEMENT`, ...)
//! and the sweep (`CLUSTERERS`, `TRANSACTIONS`, `SEED`). Clusterer
//! parameters live in `[DSTC]`, `[DRO]` and `[OPCF]` sections. An optional
//! `PRESET` key picks the starting point; unknown keys are errors.

use toml::{Table, Value};

use crate::cluster::ClustererKind;
use crate::error::{Error, Result};
use crate::harness::{preset, ExperimentSpec};
use crate::hregion::{AssignMethod, Direction};
use crate::ids::RefType;
use crate::protocol::{DependencyConfig, DependencyMix, RandomFn, RegionalProtocol};
use crate::sim::{Placement, Replacement};
use crate::workload::OpKind;

fn bad(key: &str, want: &str, v: &Value) -> Error {
    Error::config(format!("`{key}` must be {want}, got {v}"))
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "a number", v)),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(bad(key, "a non-negative integer", v)),
    }
}

fn u32_of(key: &str, v: &Value) -> Result<u32> {
    u32::try_from(uint(key, v)?).map_err(|_| bad(key, "a 32-bit integer", v))
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" => Ok(true),
            "off" | "false" | "no" => Ok(false),
            _ => Err(bad(key, "a boolean", v)),
        },
        _ => Err(bad(key, "a boolean", v)),
    }
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "a string", v))
}

fn u32_list(key: &str, v: &Value) -> Result<Vec<u32>> {
    let arr = v.as_array().ok_or_else(|| bad(key, "an array", v))?;
    arr.iter().map(|x| u32_of(key, x)).collect()
}

fn dependency(spec: &mut ExperimentSpec) -> &mut DependencyConfig {
    spec.protocol
        .dependency
        .get_or_insert_with(DependencyConfig::default)
}

/// Parses a configuration file into a full experiment specification.
pub fn parse(text: &str) -> Result<ExperimentSpec> {
    load(Some(text), None)
}

/// Starts from `base_preset` (or the file's `PRESET`, or the defaults) and
/// applies the file on top.
pub fn load(text: Option<&str>, base_preset: Option<&str>) -> Result<ExperimentSpec> {
    let table: Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| Error::config(e.to_string()))?,
        None => Table::new(),
    };
    let name = match (base_preset, table.get("PRESET")) {
        (Some(p), _) => Some(p),
        (None, Some(v)) => Some(string("PRESET", v)?),
        (None, None) => None,
    };
    let mut spec = match name {
        Some(p) => preset(p)?,
        None => ExperimentSpec::default(),
    };
    apply(&mut spec, &table)?;
    Ok(spec)
}

/// Overrides `spec` with every key of `table`.
pub fn apply(spec: &mut ExperimentSpec, table: &Table) -> Result<()> {
    // Probabilities given explicitly replace the whole mix.
    let mix_keys = [
        "RANDOM-DEP-PROB",
        "SREF-DEP-PROB",
        "DREF-DEP-PROB",
        "TRAVERSED-DEP-PROB",
        "CLASS-DEP-PROB",
    ];
    if mix_keys.iter().any(|k| table.contains_key(*k)) {
        dependency(spec).mix = DependencyMix {
            random: 0.0,
            sref: 0.0,
            dref: 0.0,
            traversed: 0.0,
            class: 0.0,
        };
    }
    let mut clocref_set = false;
    let mut olocref_set = false;
    let mut hot: Option<(Option<f64>, Option<f64>)> = None;

    for (key, v) in table {
        let k = key.as_str();
        match k {
            "PRESET" => {}
            "NAME" => spec.name = string(k, v)?.to_string(),

            "NC" => spec.db.nc = u32_of(k, v)?,
            "MAXNREF" => spec.db.maxnref = u32_of(k, v)?,
            "BASESIZE" => spec.db.basesize = u32_of(k, v)?,
            "NO" => spec.db.no = u32_of(k, v)?,
            "NREFT" => {
                spec.db.nreft = u8::try_from(uint(k, v)?).map_err(|_| bad(k, "at most 255", v))?
            }
            "ATTRANGE" => spec.db.attrange = u32_of(k, v)?,
            "CLOCREF" => {
                spec.db.clocref = u32_of(k, v)?;
                clocref_set = true;
            }
            "OLOCREF" => {
                spec.db.olocref = u32_of(k, v)?;
                olocref_set = true;
            }
            "MAXNREF-TABLE" => spec.db.maxnref_table = Some(u32_list(k, v)?),
            "BASESIZE-TABLE" => spec.db.basesize_table = Some(u32_list(k, v)?),

            "OPERATION" => spec.workload.op_kind = string(k, v)?.parse::<OpKind>()?,
            "DEPTH" => spec.workload.depth = u32_of(k, v)?,
            "REVERSE" => spec.workload.reverse = boolean(k, v)?,
            "NRND" => spec.workload.nrnd = u32_of(k, v)?,
            "NTEST" => spec.workload.ntest = u32_of(k, v)?,
            "NUPDT" => spec.workload.nupdt = u32_of(k, v)?,
            "HIER-REF-TYPE" => {
                spec.workload.hier_ref_type =
                    RefType(u8::try_from(uint(k, v)?).map_err(|_| bad(k, "at most 255", v))?)
            }

            "PROTOCOL" => {
                spec.protocol.regional.protocol = RegionalProtocol::parse(string(k, v)?)?
            }
            "H" => {
                spec.h_values = match v {
                    Value::Array(a) => a.iter().map(|x| float(k, x)).collect::<Result<_>>()?,
                    _ => vec![float(k, v)?],
                }
            }
            "N-REGIONS" => spec.protocol.regional.n_regions = Some(uint(k, v)? as usize),
            "CYCLE-REGION-SIZE" => spec.protocol.regional.cycle_region_size = float(k, v)?,
            "HR-SIZE" => spec.protocol.regional.region.hr_size = float(k, v)?,
            "INIT-PROB-W" => spec.protocol.regional.region.init_prob_w = float(k, v)?,
            "LOWEST-PROB-W" => spec.protocol.regional.region.lowest_prob_w = float(k, v)?,
            "HIGHEST-PROB-W" => spec.protocol.regional.region.highest_prob_w = float(k, v)?,
            "PROB-W-INCR-SIZE" => spec.protocol.regional.region.prob_w_incr_size = float(k, v)?,
            "OBJECT-ASSIGN-METHOD" => {
                spec.protocol.regional.region.assign_method =
                    match string(k, v)?.to_ascii_lowercase().as_str() {
                        "random" => AssignMethod::Random,
                        "by_class" | "by-class" | "class" => AssignMethod::ByClass,
                        _ => return Err(bad(k, "`random` or `by_class`", v)),
                    }
            }
            "INIT-DIR" => {
                spec.protocol.regional.region.init_dir =
                    match string(k, v)?.to_ascii_lowercase().as_str() {
                        "up" => Direction::Up,
                        "down" => Direction::Down,
                        _ => return Err(bad(k, "`up` or `down`", v)),
                    }
            }

            "DEPENDENCY" => {
                if boolean(k, v)? {
                    dependency(spec);
                } else {
                    spec.protocol.dependency = None;
                }
            }
            "RANDOM-DEP-PROB" => dependency(spec).mix.random = float(k, v)?,
            "SREF-DEP-PROB" => dependency(spec).mix.sref = float(k, v)?,
            "DREF-DEP-PROB" => dependency(spec).mix.dref = float(k, v)?,
            "TRAVERSED-DEP-PROB" => dependency(spec).mix.traversed = float(k, v)?,
            "CLASS-DEP-PROB" => dependency(spec).mix.class = float(k, v)?,
            "R" => dependency(spec).r = u32_of(k, v)?,
            "D" => dependency(spec).d = u32_of(k, v)?,
            "C" => dependency(spec).c = float(k, v)?,
            "U" => dependency(spec).u = float(k, v)?,
            "INTEGRATION" => dependency(spec).integration = boolean(k, v)?,
            "RANDOM-FN" => match string(k, v)?.to_ascii_lowercase().as_str() {
                "uniform" => dependency(spec).random_fn = RandomFn::Uniform,
                "hot_cold" | "hot-cold" | "hotcold" => {
                    hot.get_or_insert((None, None));
                }
                _ => return Err(bad(k, "`uniform` or `hot_cold`", v)),
            },
            "RANDOM-HOT-SIZE" => hot.get_or_insert((None, None)).0 = Some(float(k, v)?),
            "RANDOM-HOT-PROB" => hot.get_or_insert((None, None)).1 = Some(float(k, v)?),

            "PAGE-SIZE" => spec.sim.page_size = u32_of(k, v)?,
            "BUFFER-PAGES" => spec.sim.buffer_pages = uint(k, v)? as usize,
            "BUFFER-MB" => {
                let bytes = float(k, v)? * 1024.0 * 1024.0;
                spec.sim.buffer_pages = (bytes / spec.sim.page_size as f64).round() as usize
            }
            "REPLACEMENT" => spec.sim.replacement = Replacement::parse(string(k, v)?)?,
            "PLACEMENT" => spec.sim.placement = Placement::parse(string(k, v)?)?,
            "MULTIPROGRAMMING" => spec.sim.multiprogramming = u32_of(k, v)?,

            "CLUSTERERS" => {
                let arr = v.as_array().ok_or_else(|| bad(k, "an array", v))?;
                spec.clusterers = arr
                    .iter()
                    .map(|x| ClustererKind::parse(string(k, x)?))
                    .collect::<Result<_>>()?
            }
            "TRANSACTIONS" => spec.transactions = uint(k, v)?,
            "SEED" => spec.seed = uint(k, v)?,
            "PARALLEL" => spec.parallel = boolean(k, v)?,

            "DSTC" | "DRO" | "OPCF" => {
                let t = v.as_table().ok_or_else(|| bad(k, "a table", v))?;
                apply_clusterer(spec, k, t)?
            }
            _ => return Err(Error::config(format!("unknown key `{k}`"))),
        }
    }

    if table.contains_key("NC") && !clocref_set {
        spec.db.clocref = spec.db.nc;
    }
    if table.contains_key("NO") && !olocref_set {
        spec.db.olocref = spec.db.no;
    }
    if let Some((size, prob)) = hot {
        let dep = dependency(spec);
        let (f0, p0) = match dep.random_fn {
            RandomFn::HotCold {
                hot_fraction,
                hot_prob,
            } => (hot_fraction, hot_prob),
            RandomFn::Uniform => match RandomFn::default() {
                RandomFn::HotCold {
                    hot_fraction,
                    hot_prob,
                } => (hot_fraction, hot_prob),
                RandomFn::Uniform => unreachable!(),
            },
        };
        dep.random_fn = RandomFn::HotCold {
            hot_fraction: size.unwrap_or(f0),
            hot_prob: prob.unwrap_or(p0),
        };
    }
    if let Some(dep) = &spec.protocol.dependency {
        dep.mix.validate()?;
    }
    Ok(())
}

fn apply_clusterer(spec: &mut ExperimentSpec, section: &str, t: &Table) -> Result<()> {
    let c = &mut spec.cluster;
    for (key, v) in t {
        let k = key.as_str();
        match (section, k) {
            ("DSTC", "n") => c.dstc.n = u32_of(k, v)?,
            ("DSTC", "n_p") => c.dstc.n_p = u32_of(k, v)?,
            ("DSTC", "p") => c.dstc.p = u32_of(k, v)?,
            ("DSTC", "T_fa") => c.dstc.t_fa = float(k, v)?,
            ("DSTC", "T_fe") => c.dstc.t_fe = float(k, v)?,
            ("DSTC", "T_fc") => c.dstc.t_fc = float(k, v)?,
            ("DSTC", "w") => c.dstc.w = float(k, v)?,
            ("DRO", "MinUR") => c.dro.min_ur = float(k, v)?,
            ("DRO", "MinLT") => c.dro.min_lt = u32_of(k, v)?,
            ("DRO", "PCRate") => c.dro.pc_rate = float(k, v)?,
            ("DRO", "MaxD") => c.dro.max_d = u32_of(k, v)?,
            ("DRO", "MaxDR") => c.dro.max_dr = float(k, v)?,
            ("DRO", "MaxRR") => c.dro.max_rr = float(k, v)?,
            ("DRO", "SUInd") => c.dro.su_ind = boolean(k, v)?,
            ("OPCF", "N") => c.opcf.n = u32_of(k, v)?,
            ("OPCF", "CBT") => c.opcf.cbt = float(k, v)?,
            ("OPCF", "NPA") => c.opcf.npa = u32_of(k, v)?,
            ("OPCF", "NRI") => c.opcf.nri = u32_of(k, v)?,
            _ => return Err(Error::config(format!("unknown key `{k}` in [{section}]"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::DependencyKind;

    #[test]
    fn empty_file_is_the_default_spec() {
        assert_eq!(parse("").unwrap(), ExperimentSpec::default());
    }

    #[test]
    fn database_keys_keep_locality_windows_in_step() {
        let s = parse("NC = 20\nNO = 5000\nMAXNREF = 3\n").unwrap();
        assert_eq!((s.db.nc, s.db.no, s.db.maxnref), (20, 5000, 3));
        assert_eq!((s.db.clocref, s.db.olocref), (20, 5000));
        let s = parse("NO = 5000\nOLOCREF = 100\n").unwrap();
        assert_eq!(s.db.olocref, 100);
    }

    #[test]
    fn preset_then_overrides() {
        let s = parse(
            r#"
PRESET = "fig2a"
H = [0.5, 1]
CLUSTERERS = ["nc", "gp"]
HR-SIZE = 0.01

[DRO]
MaxD = 3

[DSTC]
T_fc = 2.5
"#,
        )
        .unwrap();
        assert_eq!(s.name, "fig2a");
        assert_eq!(s.db.no, 100_000);
        assert_eq!(s.h_values, vec![0.5, 1.0]);
        assert_eq!(s.clusterers, vec![ClustererKind::None, ClustererKind::OpcfGp]);
        assert_eq!(s.protocol.regional.region.hr_size, 0.01);
        assert_eq!(s.cluster.dro.max_d, 3);
        assert_eq!(s.cluster.dstc.t_fc, 2.5);
    }

    #[test]
    fn dependency_probabilities_replace_the_mix() {
        let s = parse("DREF-DEP-PROB = 1.0\nD = 3\nINTEGRATION = \"on\"\n").unwrap();
        let d = s.protocol.dependency.unwrap();
        assert_eq!(d.mix, DependencyMix::only(DependencyKind::DRef));
        assert_eq!(d.d, 3);
        assert!(d.integration);
        assert!(parse("SREF-DEP-PROB = 0.5\n").is_err());
    }

    #[test]
    fn hot_cold_random_function() {
        let s = parse("RANDOM-HOT-SIZE = 0.01\nRANDOM-HOT-PROB = 0.99\n").unwrap();
        assert_eq!(
            s.protocol.dependency.unwrap().random_fn,
            RandomFn::HotCold {
                hot_fraction: 0.01,
                hot_prob: 0.99
            }
        );
    }

    #[test]
    fn buffer_in_megabytes() {
        let s = parse("BUFFER-MB = 20\n").unwrap();
        assert_eq!(s.sim.buffer_pages, 5120);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse("NCC = 3\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[DRO]\nMaxZ = 1\n"), Err(Error::Config(_))));
        assert!(matches!(parse("NC = -1\n"), Err(Error::Config(_))));
        assert!(matches!(parse("PRESET = \"nope\"\n"), Err(Error::UnknownPreset(_))));
    }
}
