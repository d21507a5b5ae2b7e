//! Root-selection protocols.
//!
//! Regional protocols move probability weight between H-regions every
//! [`change_interval`] root selections. Dependency protocols derive the next
//! root from the previous one. The hybrid setting alternates one random
//! selection with `R` dependency selections, and integration replaces the
//! uniform pick from a dependency candidate set by a regional protocol over
//! that set.

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::db::Database;
use crate::error::{Error, Result};
use crate::hregion::{
    adjust_weight, assignment_order, pick_weighted, region_cardinalities, AssignMethod, Direction,
    HRegionSet, RegionParams,
};
use crate::ids::{ClassId, Oid};
use crate::rng::{self, mix64, SimRng};
use crate::workload::{AccessRecord, OpKind};

/// Tolerance on the dependency mix summing to one.
pub const MIX_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionalProtocol {
    MovingWindow,
    GradualMovingWindow,
    Cycles,
}

impl RegionalProtocol {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionalProtocol::MovingWindow => "moving_window",
            RegionalProtocol::GradualMovingWindow => "gradual_moving_window",
            RegionalProtocol::Cycles => "cycles",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "moving_window" | "moving" => Ok(RegionalProtocol::MovingWindow),
            "gradual_moving_window" | "gradual" => Ok(RegionalProtocol::GradualMovingWindow),
            "cycles" | "cycle" => Ok(RegionalProtocol::Cycles),
            _ => Err(Error::config(format!("unknown regional protocol `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalConfig {
    pub protocol: RegionalProtocol,
    /// Rate of change H in (0, 1].
    pub h_rate: f64,
    /// Number of regions for the moving protocols; `ceil(1 / HR-SIZE)` when unset.
    pub n_regions: Option<usize>,
    /// HR-SIZE of each of the two cycling regions.
    pub cycle_region_size: f64,
    pub region: RegionParams,
}

impl Default for RegionalConfig {
    fn default() -> Self {
        RegionalConfig {
            protocol: RegionalProtocol::MovingWindow,
            h_rate: 1.0,
            n_regions: None,
            cycle_region_size: 0.003,
            region: RegionParams::default(),
        }
    }
}

impl RegionalConfig {
    pub fn region_count(&self) -> usize {
        match self.protocol {
            RegionalProtocol::Cycles => 3,
            _ => self
                .n_regions
                .unwrap_or_else(|| (1.0 / self.region.hr_size - 1e-9).ceil().max(1.0) as usize),
        }
    }
}

/// Root selections between two change iterations: `max(1, round(1 / H))`.
pub fn change_interval(h_rate: f64) -> Result<u64> {
    if !(h_rate > 0.0 && h_rate <= 1.0) {
        return Err(Error::param(format!("H must lie in (0, 1], got {h_rate}")));
    }
    Ok(((1.0 / h_rate).round() as u64).max(1))
}

/// Weights, directions and window position of a regional protocol, plus
/// the clock that triggers change iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalState {
    pub protocol: RegionalProtocol,
    pub set: HRegionSet,
    pub window: usize,
    pub interval: u64,
    pub since_change: u64,
    pub iterations: u64,
}

type ClassFn<'a> = &'a dyn Fn(Oid) -> ClassId;

impl RegionalState {
    /// Builds the protocol's regions. With `oids = None` the regions carry
    /// weights only and serve as a template for integration.
    pub fn init(
        cfg: &RegionalConfig,
        oids: Option<&[Oid]>,
        class_of: ClassFn<'_>,
        seed: u64,
    ) -> Result<RegionalState> {
        cfg.region.validate()?;
        let interval = change_interval(cfg.h_rate)?;
        let p = &cfg.region;
        let (sizes, weights, incrs, dirs) = match cfg.protocol {
            RegionalProtocol::MovingWindow | RegionalProtocol::GradualMovingWindow => {
                let n = cfg.region_count();
                if n == 0 {
                    return Err(Error::param("N-REGIONS must be at least 1"));
                }
                let incr = if cfg.protocol == RegionalProtocol::MovingWindow {
                    p.highest_prob_w - p.lowest_prob_w
                } else {
                    p.prob_w_incr_size
                };
                let mut weights = vec![p.lowest_prob_w; n];
                weights[0] = p.highest_prob_w;
                (
                    vec![1.0 / n as f64; n],
                    weights,
                    vec![incr; n],
                    vec![Direction::Down; n],
                )
            }
            RegionalProtocol::Cycles => {
                let s = cfg.cycle_region_size;
                if !(s > 0.0 && s <= 0.5) {
                    return Err(Error::param(format!(
                        "CYCLE-REGION-SIZE must lie in (0, 0.5], got {s}"
                    )));
                }
                let swing = p.highest_prob_w - p.lowest_prob_w;
                (
                    vec![s, s, (1.0 - 2.0 * s).max(0.0)],
                    vec![p.highest_prob_w, p.lowest_prob_w, p.init_prob_w],
                    vec![swing, swing, 0.0],
                    vec![Direction::Down, Direction::Up, p.init_dir],
                )
            }
        };
        let mut set = match oids {
            Some(oids) => HRegionSet::partition(oids, &sizes, &weights, p, class_of, seed)?,
            None => HRegionSet::template(&sizes, &weights, p)?,
        };
        for ((r, incr), dir) in set.regions.iter_mut().zip(incrs).zip(dirs) {
            r.prob_w_incr_size = incr;
            r.direction = dir;
        }
        Ok(RegionalState {
            protocol: cfg.protocol,
            set,
            window: 0,
            interval,
            since_change: 0,
            iterations: 0,
        })
    }

    /// One change iteration.
    pub fn step(&mut self) {
        let n = self.set.len();
        match self.protocol {
            RegionalProtocol::MovingWindow => {
                if n < 2 {
                    return;
                }
                let from = self.window;
                let to = (from + 1) % n;
                self.set.regions[from].direction = Direction::Down;
                self.set.regions[to].direction = Direction::Up;
                self.set.regions.iter_mut().for_each(adjust_weight);
                self.window = to;
            }
            RegionalProtocol::GradualMovingWindow => {
                if n < 2 {
                    return;
                }
                let to = (self.window + 1) % n;
                let r = &mut self.set.regions[to];
                r.direction = r.direction.toggled();
                self.set.regions.iter_mut().for_each(adjust_weight);
                self.window = to;
            }
            RegionalProtocol::Cycles => {
                self.set.regions.iter_mut().for_each(adjust_weight);
                for r in self.set.regions.iter_mut().take(2) {
                    r.direction = r.direction.toggled();
                }
            }
        }
        self.iterations += 1;
    }

    /// Counts one root selection, running a change iteration when the
    /// interval has elapsed.
    pub fn tick(&mut self) {
        self.since_change += 1;
        if self.since_change >= self.interval {
            self.since_change = 0;
            self.step();
        }
    }

    pub fn select_root(&mut self, rng: &mut SimRng) -> Result<Oid> {
        let root = self.set.select_root(rng)?;
        self.tick();
        Ok(root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencyMix {
    pub random: f64,
    pub sref: f64,
    pub dref: f64,
    pub traversed: f64,
    pub class: f64,
}

impl DependencyMix {
    pub fn only(kind: DependencyKind) -> Self {
        let mut m = DependencyMix {
            random: 0.0,
            sref: 0.0,
            dref: 0.0,
            traversed: 0.0,
            class: 0.0,
        };
        *m.weight_mut(kind) = 1.0;
        m
    }

    fn weight_mut(&mut self, kind: DependencyKind) -> &mut f64 {
        match kind {
            DependencyKind::Random => &mut self.random,
            DependencyKind::SRef => &mut self.sref,
            DependencyKind::DRef => &mut self.dref,
            DependencyKind::Traversed => &mut self.traversed,
            DependencyKind::SameClass => &mut self.class,
        }
    }

    fn weights(&self) -> [f64; 5] {
        [self.random, self.sref, self.dref, self.traversed, self.class]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.iter().any(|&x| x < 0.0) {
            return Err(Error::param("dependency probabilities must be non-negative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > MIX_SUM_TOLERANCE {
            return Err(Error::param(format!(
                "dependency probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SimRng) -> Result<DependencyKind> {
        let i = pick_weighted(self.weights().into_iter(), rng)?;
        Ok(DependencyKind::ALL[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DependencyKind {
    Random,
    SRef,
    DRef,
    Traversed,
    SameClass,
}

impl DependencyKind {
    pub const ALL: [DependencyKind; 5] = [
        DependencyKind::Random,
        DependencyKind::SRef,
        DependencyKind::DRef,
        DependencyKind::Traversed,
        DependencyKind::SameClass,
    ];
}

/// `RAND1`, the random function of the randomization phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RandomFn {
    Uniform,
    /// One hot region holding `hot_fraction` of the objects and drawing
    /// `hot_prob` of the selections.
    HotCold { hot_fraction: f64, hot_prob: f64 },
}

impl Default for RandomFn {
    fn default() -> Self {
        RandomFn::HotCold {
            hot_fraction: 0.03,
            hot_prob: 0.8,
        }
    }
}

impl RandomFn {
    pub fn build(&self, oids: &[Oid], seed: u64) -> Result<HRegionSet> {
        let params = RegionParams {
            lowest_prob_w: 0.0,
            highest_prob_w: 1.0,
            init_prob_w: 0.0,
            prob_w_incr_size: 0.0,
            assign_method: AssignMethod::Random,
            ..Default::default()
        };
        let no_class = |_: Oid| ClassId(0);
        match *self {
            RandomFn::Uniform => HRegionSet::partition(oids, &[1.0], &[1.0], &params, &no_class, seed),
            RandomFn::HotCold {
                hot_fraction,
                hot_prob,
            } => {
                if !(0.0..=1.0).contains(&hot_fraction) || !(0.0..=1.0).contains(&hot_prob) {
                    return Err(Error::param("hot fraction and probability must lie in [0, 1]"));
                }
                HRegionSet::partition(
                    oids,
                    &[hot_fraction, 1.0 - hot_fraction],
                    &[hot_prob, 1.0 - hot_prob],
                    &params,
                    &no_class,
                    seed,
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyConfig {
    pub mix: DependencyMix,
    /// D-references per object.
    pub d: u32,
    /// Fraction of the previous traversal eligible as next root.
    pub c: f64,
    /// Fraction of the class eligible as next root.
    pub u: f64,
    /// Dependency selections per random selection.
    pub r: u32,
    pub integration: bool,
    pub random_fn: RandomFn,
}

impl Default for DependencyConfig {
    fn default() -> Self {
        DependencyConfig {
            mix: DependencyMix::only(DependencyKind::SRef),
            d: 1,
            c: 1.0,
            u: 1.0,
            r: 1,
            integration: false,
            random_fn: RandomFn::default(),
        }
    }
}

impl DependencyConfig {
    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::param(format!("C must lie in (0, 1], got {}", self.c)));
        }
        if !(self.u > 0.0 && self.u <= 1.0) {
            return Err(Error::param(format!("U must lie in (0, 1], got {}", self.u)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub regional: RegionalConfig,
    /// `None` runs the regional protocol alone over the whole database.
    pub dependency: Option<DependencyConfig>,
}

/// D-references: `d` synthetic targets per object, drawn once per database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DRefs {
    targets: Vec<Vec<Oid>>,
}

impl DRefs {
    pub fn generate(db: &Database, d: u32, seed: u64) -> DRefs {
        let mut rng = rng::stream(seed, &[rng::label("d-refs")]);
        let n = db.objects.len() as u32;
        let targets = (0..n)
            .map(|oid| {
                if n < 2 {
                    return Vec::new();
                }
                (0..d)
                    .map(|_| {
                        let t = rng.gen_range(0..n - 1);
                        Oid(if t >= oid { t + 1 } else { t })
                    })
                    .collect()
            })
            .collect();
        DRefs { targets }
    }

    pub fn of(&self, oid: Oid) -> &[Oid] {
        self.targets.get(oid.index()).map_or(&[], Vec::as_slice)
    }
}

/// `RAND1()`.
pub fn dep_random(random_set: &HRegionSet, rng: &mut SimRng) -> Result<Oid> {
    random_set.select_root(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    Structural,
    Dependency,
}

/// `RefSet(prev, D)`: the structural references of `prev`, or its
/// D-references. Deleted targets are skipped.
pub fn ref_candidates(prev: Oid, kind: RefKind, db: &Database, d_refs: Option<&DRefs>) -> Vec<Oid> {
    let Some(obj) = db.object(prev) else {
        return Vec::new();
    };
    match kind {
        RefKind::Structural => obj
            .orefs
            .iter()
            .map(|r| r.target)
            .filter(|&t| db.contains(t))
            .collect(),
        RefKind::Dependency => d_refs
            .map(|d| d.of(prev).iter().copied().filter(|&t| db.contains(t)).collect())
            .unwrap_or_default(),
    }
}

/// `TraversedSet(prev, C)`: the first `ceil(C × n)` objects of the previous
/// record, in visit order.
pub fn traversed_candidates(prev_trace: &AccessRecord, c: f64) -> Vec<Oid> {
    let mut seen = std::collections::HashSet::new();
    let visited: Vec<Oid> = prev_trace.oids().filter(|o| seen.insert(*o)).collect();
    if visited.is_empty() {
        return visited;
    }
    let k = ((c * visited.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    visited[..k.min(visited.len())].to_vec()
}

/// `f(prev, Class(prev), U)`: a contiguous block of `ceil(U × |class|)`
/// iterator entries, starting at a hash-derived offset and wrapping. Pure in
/// `prev`.
pub fn same_class_candidates(prev: Oid, u: f64, db: &Database) -> Vec<Oid> {
    let Some(class) = db.class_of(prev) else {
        return Vec::new();
    };
    let members = &db.class(class).iterator;
    let n = members.len();
    if n == 0 {
        return Vec::new();
    }
    let len = ((u * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let start = (mix64(prev.0 as u64) % n as u64) as usize;
    (0..len).map(|i| members[(start + i) % n]).collect()
}

fn uniform_pick(cands: &[Oid], rng: &mut SimRng) -> Oid {
    cands[rng.gen_range(0..cands.len())]
}

/// Picks from a candidate set through a regional protocol instead of
/// uniformly. The candidate set is cut into the template's regions with the
/// floor/remainder rule; when it has fewer objects than the template has
/// regions, template region `i` folds onto bucket `i mod m` and the folded
/// weights add up. Empty buckets are never selected.
pub fn integrated_pick(
    cands: &[Oid],
    template: &HRegionSet,
    class_of: ClassFn<'_>,
    seed: u64,
    rng: &mut SimRng,
) -> Result<Oid> {
    match cands.len() {
        0 => return Err(Error::param("empty candidate set")),
        1 => return Ok(cands[0]),
        _ => {}
    }
    let content_seed = cands
        .iter()
        .fold(seed, |h, o| mix64(h ^ o.0 as u64));
    let order = assignment_order(cands, template.assign_method, class_of, content_seed);
    let m = order.len();
    let k = template.len();
    let (buckets, weights): (Vec<&[Oid]>, Vec<f64>) = if m >= k {
        let sizes: Vec<f64> = template.regions.iter().map(|r| r.hr_size).collect();
        let counts = region_cardinalities(&sizes, m);
        let mut start = 0;
        let mut buckets = Vec::with_capacity(k);
        for c in counts {
            buckets.push(&order[start..start + c]);
            start += c;
        }
        let w = template
            .regions
            .iter()
            .zip(&buckets)
            .map(|(r, b)| if b.is_empty() { 0.0 } else { r.prob_w })
            .collect();
        (buckets, w)
    } else {
        let mut w = vec![0.0; m];
        for (i, r) in template.regions.iter().enumerate() {
            w[i % m] += r.prob_w;
        }
        ((0..m).map(|b| &order[b..b + 1]).collect(), w)
    };
    let b = match pick_weighted(weights.iter().copied(), rng) {
        Ok(b) => b,
        Err(Error::DegenerateWeights) => return Ok(uniform_pick(cands, rng)),
        Err(e) => return Err(e),
    };
    Ok(uniform_pick(buckets[b], rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HybridPhase {
    Randomize,
    Dependency,
}

#[derive(Debug, Clone)]
pub struct DependencyState {
    pub cfg: DependencyConfig,
    pub phase: HybridPhase,
    pub remaining: u32,
    pub random_set: HRegionSet,
    pub d_refs: Option<DRefs>,
}

/// Everything needed to produce the next root.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub regional: RegionalState,
    pub dependency: Option<DependencyState>,
    pub prev_root: Option<Oid>,
    pub prev_trace: Option<AccessRecord>,
    /// Dependency selections that fell back to the random function because
    /// their candidate set was empty.
    pub fallbacks: u64,
    pub selections: u64,
    partition_seed: u64,
}

impl ProtocolState {
    pub fn new(cfg: &ProtocolConfig, db: &Database, workload: OpKind, seed: u64) -> Result<Self> {
        let oids = db.live_oids();
        let class_of = |o: Oid| db.class_of(o).unwrap_or_default();
        let region_seed = rng::derive_seed(seed, &[rng::label("regions")]);
        let dependency = match &cfg.dependency {
            None => None,
            Some(dep) => {
                dep.validate()?;
                if dep.integration
                    && dep.mix.traversed > 0.0
                    && !matches!(
                        workload,
                        OpKind::SimpleTraversal | OpKind::HierarchyTraversal
                    )
                {
                    return Err(Error::config(format!(
                        "integrating the traversed-objects protocol needs a simple or hierarchy traversal, not {workload}"
                    )));
                }
                let random_set = dep
                    .random_fn
                    .build(&oids, rng::derive_seed(seed, &[rng::label("random-fn")]))?;
                let d_refs = (dep.mix.dref > 0.0).then(|| DRefs::generate(db, dep.d, seed));
                Some(DependencyState {
                    cfg: dep.clone(),
                    phase: HybridPhase::Randomize,
                    remaining: 0,
                    random_set,
                    d_refs,
                })
            }
        };
        let members = dependency.is_none().then_some(oids.as_slice());
        let regional = RegionalState::init(&cfg.regional, members, &class_of, region_seed)?;
        Ok(ProtocolState {
            regional,
            dependency,
            prev_root: None,
            prev_trace: None,
            fallbacks: 0,
            selections: 0,
            partition_seed: rng::derive_seed(seed, &[rng::label("integration")]),
        })
    }

    /// Draws the next root and advances the change clock.
    pub fn next_root(&mut self, db: &Database, rng: &mut SimRng) -> Result<Oid> {
        let root = match self.dependency.is_some() {
            false => self.regional.set.select_root(rng)?,
            true => self.hybrid_next(db, rng)?,
        };
        self.regional.tick();
        self.prev_root = Some(root);
        self.selections += 1;
        Ok(root)
    }

    /// Remembers the record produced from the last root, for the
    /// traversed-objects protocol.
    pub fn observe(&mut self, record: &AccessRecord) {
        self.prev_trace = Some(record.clone());
    }

    fn hybrid_next(&mut self, db: &Database, rng: &mut SimRng) -> Result<Oid> {
        let dep = self.dependency.as_mut().expect("hybrid without dependency state");
        if dep.phase == HybridPhase::Randomize {
            let root = dep_random(&dep.random_set, rng)?;
            if dep.cfg.r > 0 {
                dep.phase = HybridPhase::Dependency;
                dep.remaining = dep.cfg.r;
            }
            return Ok(root);
        }
        let kind = dep.cfg.mix.sample(rng)?;
        dep.remaining -= 1;
        if dep.remaining == 0 {
            dep.phase = HybridPhase::Randomize;
        }
        let dep = self.dependency.as_ref().unwrap();
        let cands = match (kind, self.prev_root) {
            (DependencyKind::Random, _) => return dep_random(&dep.random_set, rng),
            (_, None) => Vec::new(),
            (DependencyKind::SRef, Some(prev)) => {
                ref_candidates(prev, RefKind::Structural, db, None)
            }
            (DependencyKind::DRef, Some(prev)) => {
                ref_candidates(prev, RefKind::Dependency, db, dep.d_refs.as_ref())
            }
            (DependencyKind::Traversed, Some(_)) => self
                .prev_trace
                .as_ref()
                .map(|t| traversed_candidates(t, dep.cfg.c))
                .unwrap_or_default(),
            (DependencyKind::SameClass, Some(prev)) => same_class_candidates(prev, dep.cfg.u, db),
        };
        if cands.is_empty() {
            self.fallbacks += 1;
            return dep_random(&dep.random_set, rng);
        }
        if dep.cfg.integration {
            let class_of = |o: Oid| db.class_of(o).unwrap_or_default();
            integrated_pick(&cands, &self.regional.set, &class_of, self.partition_seed, rng)
        } else {
            Ok(uniform_pick(&cands, rng))
        }
    }
}
