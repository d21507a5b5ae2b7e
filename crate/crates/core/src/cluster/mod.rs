//! Dynamic clustering policies.
//!
//! Each policy watches the records replayed by the simulator and, at its own
//! trigger points, reorganizes the page map, paying clustering reads and
//! writes. The policies model the properties that matter for how they cope
//! with drift: DSTC re-clusters everything with any benefit and reads what it
//! needs; DRO and the OPCF variants bound the pages touched per round, and
//! OPCF only touches pages already in the buffer.

mod dro;
mod dstc;
mod layout;
mod opcf;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Store;
use crate::workload::AccessRecord;

pub use dro::Dro;
pub use dstc::Dstc;
pub use layout::place_units;
pub use opcf::{Opcf, OpcfVariant};
pub use stats::{PageUsage, UsageStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClustererKind {
    None,
    DstcLike,
    Dro,
    OpcfGp,
    OpcfPrp,
}

impl ClustererKind {
    pub const ALL: [ClustererKind; 5] = [
        ClustererKind::None,
        ClustererKind::DstcLike,
        ClustererKind::Dro,
        ClustererKind::OpcfGp,
        ClustererKind::OpcfPrp,
    ];

    /// Short name used on the command line and in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ClustererKind::None => "nc",
            ClustererKind::DstcLike => "dstc",
            ClustererKind::Dro => "dro",
            ClustererKind::OpcfGp => "gp",
            ClustererKind::OpcfPrp => "prp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nc" | "none" => Ok(ClustererKind::None),
            "dstc" | "dstc_like" => Ok(ClustererKind::DstcLike),
            "dro" => Ok(ClustererKind::Dro),
            "gp" | "opcf_gp" => Ok(ClustererKind::OpcfGp),
            "prp" | "opcf_prp" => Ok(ClustererKind::OpcfPrp),
            _ => Err(Error::config(format!("unknown clusterer `{s}`"))),
        }
    }

    /// DRO and the OPCF variants.
    pub fn is_flexible(self) -> bool {
        matches!(
            self,
            ClustererKind::Dro | ClustererKind::OpcfGp | ClustererKind::OpcfPrp
        )
    }
}

impl std::fmt::Display for ClustererKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DstcParams {
    /// Transactions per observation window; transitions are consolidated
    /// at the end of each.
    pub n: u32,
    /// Pages a clustering unit must save to be re-clustered.
    pub n_p: u32,
    /// Transactions between re-clustering rounds.
    pub p: u32,
    /// Minimum object frequency in a period.
    pub t_fa: f64,
    /// Minimum transition count in a period.
    pub t_fe: f64,
    /// Minimum consolidated transition weight inside a clustering unit.
    pub t_fc: f64,
    /// Weight kept by consolidated transitions at each consolidation.
    pub w: f64,
}

impl Default for DstcParams {
    fn default() -> Self {
        DstcParams {
            n: 200,
            n_p: 1,
            p: 1000,
            t_fa: 1.0,
            t_fe: 1.0,
            t_fc: 1.0,
            w: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroParams {
    /// Minimum usage rate of a candidate page.
    pub min_ur: f64,
    /// Minimum transactions touching a candidate page in the window.
    pub min_lt: u32,
    /// Trigger rate: one analysis window every `1 / PCRate` transactions,
    /// re-clustering when at least this fraction of touched pages are
    /// candidates.
    pub pc_rate: f64,
    /// Most pages written per round.
    pub max_d: u32,
    /// Most pages written per round, as a fraction of all pages.
    pub max_dr: f64,
    /// Skip the round when the proposed layout resembles the current one at
    /// least this much.
    pub max_rr: f64,
    /// Whether sequential updates feed the statistics.
    pub su_ind: bool,
}

impl Default for DroParams {
    fn default() -> Self {
        DroParams {
            min_ur: 0.001,
            min_lt: 2,
            pc_rate: 0.02,
            max_d: 1,
            max_dr: 0.2,
            max_rr: 0.95,
            su_ind: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpcfParams {
    /// Transactions in the sliding statistics window.
    pub n: u32,
    /// Minimum badness of a page worth re-clustering.
    pub cbt: f64,
    /// Transactions between re-clustering rounds.
    pub npa: u32,
    /// Most pages re-clustered per round.
    pub nri: u32,
}

impl Default for OpcfParams {
    fn default() -> Self {
        OpcfParams {
            n: 200,
            cbt: 0.1,
            npa: 50,
            nri: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustererConfig {
    pub kind: ClustererKind,
    pub dstc: DstcParams,
    pub dro: DroParams,
    pub opcf: OpcfParams,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        ClustererConfig {
            kind: ClustererKind::None,
            dstc: DstcParams::default(),
            dro: DroParams::default(),
            opcf: OpcfParams::default(),
        }
    }
}

fn rate(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn count(name: &str, v: u32) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be at least 1")))
    }
}

impl ClustererConfig {
    pub fn of(kind: ClustererKind) -> Self {
        ClustererConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dstc;
        count("n", d.n)?;
        count("n_p", d.n_p)?;
        count("p", d.p)?;
        rate("w", d.w)?;
        for (name, t) in [("T_fa", d.t_fa), ("T_fe", d.t_fe), ("T_fc", d.t_fc)] {
            if t.is_nan() || t < 0.0 {
                return Err(Error::param(format!("{name} must be non-negative")));
            }
        }
        let r = &self.dro;
        rate("MinUR", r.min_ur)?;
        rate("PCRate", r.pc_rate)?;
        rate("MaxDR", r.max_dr)?;
        rate("MaxRR", r.max_rr)?;
        count("MinLT", r.min_lt)?;
        count("MaxD", r.max_d)?;
        let o = &self.opcf;
        count("N", o.n)?;
        count("NPA", o.npa)?;
        count("NRI", o.nri)?;
        if o.cbt.is_nan() || o.cbt < 0.0 {
            return Err(Error::param("CBT must be non-negative"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Clusterer + Send>> {
        self.validate()?;
        Ok(match self.kind {
            ClustererKind::None => Box::new(NoClustering),
            ClustererKind::DstcLike => Box::new(Dstc::new(self.dstc.clone())),
            ClustererKind::Dro => Box::new(Dro::new(self.dro.clone())),
            ClustererKind::OpcfGp => Box::new(Opcf::new(OpcfVariant::Gp, self.opcf.clone())),
            ClustererKind::OpcfPrp => Box::new(Opcf::new(OpcfVariant::Prp, self.opcf.clone())),
        })
    }
}

/// I/O and pages of one re-clustering decision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClusterIo {
    pub reads: u64,
    pub writes: u64,
    /// Pages written by the round.
    pub pages: u64,
    /// Whether the placement was reorganized.
    pub ran: bool,
}

pub trait Clusterer {
    fn kind(&self) -> ClustererKind;

    /// Feeds one replayed record into the statistics.
    fn observe(&mut self, rec: &AccessRecord, store: &Store);

    /// Whether a trigger point has been reached.
    fn due(&self) -> bool;

    /// Runs one decision at a trigger point.
    fn recluster(&mut self, store: &mut Store) -> Result<ClusterIo>;

    fn after_transaction(&mut self, rec: &AccessRecord, store: &mut Store) -> Result<ClusterIo> {
        self.observe(rec, store);
        if self.due() {
            self.recluster(store)
        } else {
            Ok(ClusterIo::default())
        }
    }
}

/// The no-clustering baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClustering;

impl Clusterer for NoClustering {
    fn kind(&self) -> ClustererKind {
        ClustererKind::None
    }

    fn observe(&mut self, _: &AccessRecord, _: &Store) {}

    fn due(&self) -> bool {
        false
    }

    fn recluster(&mut self, _: &mut Store) -> Result<ClusterIo> {
        Ok(ClusterIo::default())
    }
}
