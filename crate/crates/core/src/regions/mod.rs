//! Achievable and outer regions in rate-equivocation space.

mod dist;
mod grid;
mod hull;
mod one;
mod two;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::info::InfoError;

pub use dist::{mi_bundle_one_message, mi_bundle_two_message, Kernel, OneMessageDist, OneMessageMi, TwoMessageDist, TwoMessageMi};
pub use grid::{DegradedFamily, DistributionGrid, Family, GridConfig, GridDescription, OneMessageFamily, TwoMessageFamily};
pub use hull::convexify;
pub use one::{
    degraded_region, inner_bound_one, inner_region_one, outer_bound_one, outer_region_one, secrecy_capacity_at_r0,
    secrecy_capacity_region_one, OneMessageBounds, SecrecyOptimum,
};
pub use two::{
    admits_inner_two, equivocation_set_explicit, equivocation_set_union_form, fig8_case, in_mac, mac_pentagon, positive_secrecy_possible,
    random_mac_triple, secrecy_rate_region_two, secrecy_subregions_two, two_message_inner_bound, EquivocationSet,
    Fig8Case, SecrecyFlags, SecrecySubregions, UnionFormSet, UNION_FORM_RESOLUTION,
};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear program failed: {0}")]
    Lp(String),
}

/// `(R0, R1, R2, R1e, R2e)` in bits per channel use; unused components are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePoint {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r1e: f64,
    pub r2e: f64,
}

impl RatePoint {
    /// One confidential message: `(R0, R1, Re)`.
    pub fn one_message(r0: f64, r1: f64, re: f64) -> Self {
        Self { r0, r1, r1e: re, ..Self::default() }
    }

    /// Perfect secrecy: equivocation equals the message rate.
    pub fn secrecy(r0: f64, r1: f64, r2: f64) -> Self {
        Self { r0, r1, r2, r1e: r1, r2e: r2 }
    }

    /// `(R0, R1, R1e, R2, R2e)`. Every region is the down-closure of its
    /// points in these coordinates, cut by `R1e <= R1` and `R2e <= R2`.
    pub fn coords(&self) -> [f64; 5] {
        [self.r0, self.r1, self.r1e, self.r2, self.r2e]
    }

    /// Nonnegative with equivocation not above the message rate, up to `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.coords().iter().all(|&v| v >= -tol) && self.r1e <= self.r1 + tol && self.r2e <= self.r2 + tol
    }
}

/// Rate or equivocation coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    R0,
    R1,
    R2,
    R1e,
    R2e,
}

impl Axis {
    fn functional(self) -> [f64; 5] {
        match self {
            Axis::R0 => [1.0, 0.0, 0.0, 0.0, 0.0],
            Axis::R1 => [0.0, 1.0, 0.0, 0.0, 0.0],
            Axis::R1e => [0.0, 0.0, 1.0, 0.0, 0.0],
            Axis::R2 => [0.0, 0.0, 0.0, 1.0, 0.0],
            Axis::R2e => [0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Inner,
    Outer,
    Secrecy,
    Mac,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Inner => "inner",
            Provenance::Outer => "outer",
            Provenance::Secrecy => "secrecy",
            Provenance::Mac => "mac",
        })
    }
}

/// How a point cloud is reduced before storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slicing {
    /// Extreme points of the full down-closed hull.
    Full,
    /// Extreme points of each fixed-R0 slice.
    ByR0,
    /// Deduplicated cloud, no reduction.
    Raw,
}

/// A distribution that generated some trace points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceDist {
    One(OneMessageDist),
    Two(TwoMessageDist),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub point: RatePoint,
    /// Grid-point id of the generating distribution (refined points continue past the grid).
    pub grid_point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTrace {
    pub provenance: Provenance,
    pub points: Vec<TracePoint>,
    /// Generating distributions keyed by grid-point id, for re-checking.
    pub sources: Vec<(usize, SourceDist)>,
    pub grid: GridDescription,
    pub warnings: Vec<String>,
}

impl RegionTrace {
    pub(crate) fn from_cloud(
        provenance: Provenance,
        cloud: Vec<TracePoint>,
        all_sources: &dyn Fn(usize) -> Option<SourceDist>,
        grid: GridDescription,
        warnings: Vec<String>,
        slicing: Slicing,
    ) -> Self {
        // Lowest grid id per distinct point.
        let key = |p: &RatePoint| [p.r0, p.r1, p.r2, p.r1e, p.r2e].map(f64::to_bits);
        let mut origin: HashMap<[u64; 5], usize> = HashMap::new();
        for t in &cloud {
            let e = origin.entry(key(&t.point)).or_insert(t.grid_point);
            *e = (*e).min(t.grid_point);
        }
        let hull: Vec<RatePoint> = if slicing == Slicing::Raw {
            let mut seen = std::collections::HashSet::new();
            cloud.iter().map(|t| t.point).filter(|p| seen.insert(key(p))).collect()
        } else if slicing == Slicing::ByR0 {
            // Hull each fixed-R0 slice separately; membership queries still see the full hull.
            let mut levels: BTreeMap<u64, Vec<RatePoint>> = BTreeMap::new();
            for t in &cloud {
                levels.entry(t.point.r0.to_bits()).or_default().push(RatePoint { r0: 0.0, ..t.point });
            }
            let mut levels: Vec<(f64, Vec<RatePoint>)> = levels.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
            levels.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            levels
                .into_iter()
                .flat_map(|(r0, slice)| convexify(&slice).into_iter().map(move |p| RatePoint { r0, ..p }))
                .collect()
        } else {
            let raw: Vec<RatePoint> = cloud.iter().map(|t| t.point).collect();
            convexify(&raw)
        };
        let points: Vec<TracePoint> = hull
            .into_iter()
            .map(|h| TracePoint { point: h, grid_point: origin[&key(&h)] })
            .collect();
        let mut ids: Vec<usize> = points.iter().map(|t| t.grid_point).collect();
        ids.sort_unstable();
        ids.dedup();
        let sources = ids.into_iter().filter_map(|id| all_sources(id).map(|d| (id, d))).collect();
        Self {
            provenance,
            points,
            sources,
            grid,
            warnings,
        }
    }

    pub fn rate_points(&self) -> Vec<RatePoint> {
        self.points.iter().map(|t| t.point).collect()
    }

    pub fn source(&self, grid_point: usize) -> Option<&SourceDist> {
        self.sources.iter().find(|(id, _)| *id == grid_point).map(|(_, d)| d)
    }

    /// Largest value of `objective` over the region subject to `axis >= value` floors.
    /// `None` when no region point meets the floors.
    pub fn maximize(&self, objective: Axis, floors: &[(Axis, f64)]) -> Result<Option<f64>, RegionError> {
        let cloud: Vec<[f64; 5]> = self.points.iter().map(|t| t.point.coords()).collect();
        let cons: Vec<([f64; 5], f64)> = floors.iter().map(|(a, v)| (a.functional(), *v)).collect();
        hull::maximize_linear(&cloud, &objective.functional(), &cons)
    }
}

/// Is `p` within `tol` of the convex, origin-comprehensive hull of the trace?
/// (Down-closure of the trace points, restricted to valid rate points.)
pub fn contains(trace: &RegionTrace, p: &RatePoint, tol: f64) -> Result<bool, RegionError> {
    if trace.points.is_empty() {
        return Err(RegionError::Precondition("empty region trace".into()));
    }
    if !p.is_valid(tol) {
        return Ok(false);
    }
    let cloud: Vec<[f64; 5]> = trace.points.iter().map(|t| t.point.coords()).collect();
    hull::in_down_hull(&cloud, &p.coords(), &[0, 1, 2, 3, 4], tol)
}

/// Evenly spaced grid `start, start + step, ...` up to `stop` (inclusive within 1e-9).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}
