//! H-regions: disjoint sets of objects sharing one probability weight.
//!
//! Weights are unnormalized. The probability of picking a region is its
//! weight over the sum of the weights of all non-empty regions, computed at
//! selection time.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClassId, Oid};
use crate::rng::{self, SimRng};

/// Tolerance on `Σ hr_size = 1`.
pub const SIZE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn toggled(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssignMethod {
    Random,
    ByClass,
}

/// The per-region parameter bundle: HR-SIZE, INIT-PROB-W, LOWEST-PROB-W,
/// HIGHEST-PROB-W, PROB-W-INCR-SIZE, OBJECT-ASSIGN-METHOD, INIT-DIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub hr_size: f64,
    pub init_prob_w: f64,
    pub lowest_prob_w: f64,
    pub highest_prob_w: f64,
    pub prob_w_incr_size: f64,
    pub assign_method: AssignMethod,
    pub init_dir: Direction,
}

impl Default for RegionParams {
    /// The clustering experiment settings: 0.3 % regions, 0.8 / 0.0006 weights,
    /// 0.02 increments, random assignment.
    fn default() -> Self {
        RegionParams {
            hr_size: 0.003,
            init_prob_w: 0.0006,
            lowest_prob_w: 0.0006,
            highest_prob_w: 0.80,
            prob_w_incr_size: 0.02,
            assign_method: AssignMethod::Random,
            init_dir: Direction::Down,
        }
    }
}

impl RegionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hr_size > 0.0 && self.hr_size <= 1.0) {
            return Err(Error::param(format!("HR-SIZE must lie in (0, 1], got {}", self.hr_size)));
        }
        if self.lowest_prob_w < 0.0 || self.lowest_prob_w > self.highest_prob_w {
            return Err(Error::param("need 0 <= LOWEST-PROB-W <= HIGHEST-PROB-W"));
        }
        if self.prob_w_incr_size < 0.0 {
            return Err(Error::param("PROB-W-INCR-SIZE must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HRegion {
    pub hr_size: f64,
    pub prob_w: f64,
    pub lowest_prob_w: f64,
    pub highest_prob_w: f64,
    pub prob_w_incr_size: f64,
    pub direction: Direction,
    pub members: Vec<Oid>,
}

impl HRegion {
    pub fn new(hr_size: f64, prob_w: f64, params: &RegionParams) -> HRegion {
        HRegion {
            hr_size,
            prob_w: prob_w.clamp(params.lowest_prob_w, params.highest_prob_w),
            lowest_prob_w: params.lowest_prob_w,
            highest_prob_w: params.highest_prob_w,
            prob_w_incr_size: params.prob_w_incr_size,
            direction: params.init_dir,
            members: Vec::new(),
        }
    }

    pub fn is_at_floor(&self) -> bool {
        self.prob_w <= self.lowest_prob_w
    }

    pub fn is_at_ceiling(&self) -> bool {
        self.prob_w >= self.highest_prob_w
    }
}

/// Moves the weight one increment in the region's direction, clamped to its
/// bounds. The direction itself is never changed here.
pub fn adjust_weight(region: &mut HRegion) {
    let step = match region.direction {
        Direction::Up => region.prob_w_incr_size,
        Direction::Down => -region.prob_w_incr_size,
    };
    let next = region.prob_w + step;
    // Land exactly on a bound that the step reaches up to round-off, so a
    // full swing of `highest - lowest` is reversible.
    region.prob_w = if next <= region.lowest_prob_w + BOUND_EPS {
        region.lowest_prob_w
    } else if next >= region.highest_prob_w - BOUND_EPS {
        region.highest_prob_w
    } else {
        next
    };
}

const BOUND_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HRegionSet {
    pub regions: Vec<HRegion>,
    pub assign_method: AssignMethod,
}

/// Cardinalities for `n` items cut by `sizes`: floor per region, with the
/// rounding remainder added to the last region of non-zero size.
pub fn region_cardinalities(sizes: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = sizes
        .iter()
        .map(|&s| ((s * n as f64) + 1e-9).floor() as usize)
        .collect();
    let mut assigned: usize = counts.iter().sum();
    // floating error can overshoot by one on the last regions
    while assigned > n {
        let k = counts.iter().rposition(|&c| c > 0).unwrap();
        counts[k] -= 1;
        assigned -= 1;
    }
    if let Some(last) = sizes.iter().rposition(|&s| s > 0.0) {
        counts[last] += n - assigned;
    }
    counts
}

pub fn check_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::param("at least one H-region is required"));
    }
    if sizes.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::param("HR-SIZE values must lie in [0, 1]"));
    }
    let sum: f64 = sizes.iter().sum();
    if (sum - 1.0).abs() > SIZE_SUM_TOLERANCE {
        return Err(Error::param(format!("HR-SIZE values sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Orders `oids` per the assignment method: a seeded shuffle, or a stable
/// sort by class ID.
pub fn assignment_order(
    oids: &[Oid],
    method: AssignMethod,
    class_of: &dyn Fn(Oid) -> ClassId,
    seed: u64,
) -> Vec<Oid> {
    let mut order = oids.to_vec();
    match method {
        AssignMethod::Random => {
            let mut rng = rng::stream(seed, &[rng::label("partition")]);
            order.shuffle(&mut rng);
        }
        AssignMethod::ByClass => order.sort_by_key(|&o| class_of(o)),
    }
    order
}

impl HRegionSet {
    /// Builds a set of regions over `oids`. `sizes[k]` and `weights[k]` give
    /// region k its HR-SIZE and initial weight; every other parameter comes
    /// from `params`.
    pub fn partition(
        oids: &[Oid],
        sizes: &[f64],
        weights: &[f64],
        params: &RegionParams,
        class_of: &dyn Fn(Oid) -> ClassId,
        seed: u64,
    ) -> Result<HRegionSet> {
        check_sizes(sizes)?;
        if oids.is_empty() {
            return Err(Error::param("cannot partition an empty object set"));
        }
        if weights.len() != sizes.len() {
            return Err(Error::param("one weight per region is required"));
        }
        let order = assignment_order(oids, params.assign_method, class_of, seed);
        let counts = region_cardinalities(sizes, order.len());
        let mut regions = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for k in 0..sizes.len() {
            let mut r = HRegion::new(sizes[k], weights[k], params);
            r.members = order[start..start + counts[k]].to_vec();
            start += counts[k];
            regions.push(r);
        }
        Ok(HRegionSet {
            regions,
            assign_method: params.assign_method,
        })
    }

    /// Weight-only regions with no members, used as protocol templates.
    pub fn template(sizes: &[f64], weights: &[f64], params: &RegionParams) -> Result<HRegionSet> {
        check_sizes(sizes)?;
        Ok(HRegionSet {
            regions: sizes
                .iter()
                .zip(weights)
                .map(|(&s, &w)| HRegion::new(s, w, params))
                .collect(),
            assign_method: params.assign_method,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.prob_w).collect()
    }

    /// Selection probability of each region (zero for empty regions).
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total: f64 = self
            .regions
            .iter()
            .filter(|r| !r.members.is_empty())
            .map(|r| r.prob_w)
            .sum();
        if total <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        Ok(self
            .regions
            .iter()
            .map(|r| if r.members.is_empty() { 0.0 } else { r.prob_w / total })
            .collect())
    }

    /// Index of a region drawn with probability proportional to its weight.
    pub fn select_region(&self, rng: &mut SimRng) -> Result<usize> {
        pick_weighted(
            self.regions
                .iter()
                .map(|r| if r.members.is_empty() { 0.0 } else { r.prob_w }),
            rng,
        )
    }

    /// A region by weight, then a uniform member of it.
    pub fn select_root(&self, rng: &mut SimRng) -> Result<Oid> {
        let k = self.select_region(rng)?;
        let members = &self.regions[k].members;
        Ok(members[rng.gen_range(0..members.len())])
    }

    pub fn region_of(&self, oid: Oid) -> Option<usize> {
        self.regions.iter().position(|r| r.members.contains(&oid))
    }
}

/// Draws an index with probability proportional to its weight.
pub fn pick_weighted<I>(weights: I, rng: &mut SimRng) -> Result<usize>
where
    I: Iterator<Item = f64> + Clone,
{
    let total: f64 = weights.clone().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let mut x = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if x < w {
            return Ok(i);
        }
        x -= w;
    }
    Ok(last)
}
