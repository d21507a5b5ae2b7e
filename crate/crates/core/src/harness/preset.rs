use super::{default_h_grid, ExperimentSpec};
use crate::cluster::{ClustererConfig, ClustererKind};
use crate::db::SchemaParams;
use crate::error::{Error, Result};
use crate::hregion::RegionParams;
use crate::protocol::{
    DependencyConfig, DependencyKind, DependencyMix, ProtocolConfig, RandomFn, RegionalConfig,
    RegionalProtocol,
};
use crate::sim::SimConfig;
use crate::workload::WorkloadParams;

pub const PRESETS: [&str; 5] = ["fig2a", "fig2b", "fig3a", "fig3b", "fig5_workload"];

/// Objects in the clustering experiments.
const EXPERIMENT_NO: u32 = 100_000;

/// The clustering experiments' database: 50 classes, with every class
/// holding MAXNREF references so a depth-2 traversal touches about ten
/// objects, and BASESIZE scaled so the mean object is near 233 bytes.
pub(crate) fn experiment_db(no: u32) -> SchemaParams {
    let mut p = SchemaParams::with_counts(50, no);
    p.maxnref_table = Some(vec![p.maxnref; p.nc as usize]);
    p.basesize_table = Some(vec![CALIBRATED_BASESIZE; p.nc as usize]);
    p
}

/// Per-class BASESIZE giving a mean object near 233 bytes under
/// `basesize × (1 + refs)`: the consistency check drops the references that
/// would close inheritance or composition cycles, leaving about 9.1 per class.
pub(crate) const CALIBRATED_BASESIZE: u32 = 23;

fn base(name: &str) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        db: experiment_db(EXPERIMENT_NO),
        workload: WorkloadParams::default(),
        protocol: ProtocolConfig::default(),
        sim: SimConfig::default(),
        cluster: ClustererConfig::default(),
        clusterers: ClustererKind::ALL.to_vec(),
        transactions: 10_000,
        h_values: default_h_grid(),
        seed: 42,
        parallel: true,
    }
}

fn regional(protocol: RegionalProtocol, region: RegionParams) -> RegionalConfig {
    RegionalConfig {
        protocol,
        region,
        ..Default::default()
    }
}

fn sref_hybrid(protocol: RegionalProtocol) -> ProtocolConfig {
    ProtocolConfig {
        regional: regional(protocol, RegionParams::default()),
        dependency: Some(DependencyConfig {
            mix: DependencyMix::only(DependencyKind::SRef),
            r: 1,
            integration: true,
            random_fn: RandomFn::HotCold {
                hot_fraction: 0.03,
                hot_prob: 0.8,
            },
            ..Default::default()
        }),
    }
}

/// A named, fully specified experiment configuration.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let spec = match name {
        "fig2a" => ExperimentSpec {
            protocol: ProtocolConfig {
                regional: regional(RegionalProtocol::MovingWindow, RegionParams::default()),
                dependency: None,
            },
            ..base(name)
        },
        "fig2b" => ExperimentSpec {
            protocol: ProtocolConfig {
                regional: regional(RegionalProtocol::GradualMovingWindow, RegionParams::default()),
                dependency: None,
            },
            ..base(name)
        },
        "fig3a" => ExperimentSpec {
            protocol: sref_hybrid(RegionalProtocol::MovingWindow),
            ..base(name)
        },
        "fig3b" => ExperimentSpec {
            protocol: sref_hybrid(RegionalProtocol::GradualMovingWindow),
            ..base(name)
        },
        // Workload only: 400,000 objects and a 20 MB buffer, as in the
        // object-store runs.
        "fig5_workload" => ExperimentSpec {
            db: experiment_db(400_000),
            protocol: ProtocolConfig {
                regional: regional(
                    RegionalProtocol::MovingWindow,
                    RegionParams {
                        hr_size: 0.05,
                        ..Default::default()
                    },
                ),
                dependency: Some(DependencyConfig {
                    mix: DependencyMix::only(DependencyKind::Traversed),
                    c: 1.0,
                    r: 1,
                    integration: true,
                    random_fn: RandomFn::HotCold {
                        hot_fraction: 0.01,
                        hot_prob: 0.99,
                    },
                    ..Default::default()
                }),
            },
            sim: SimConfig {
                buffer_pages: 20 * 1024 * 1024 / 4096,
                ..Default::default()
            },
            clusterers: vec![ClustererKind::None],
            ..base(name)
        },
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(spec)
}
