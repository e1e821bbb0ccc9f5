//! One confidential message: inner/outer capacity-equivocation bounds, the
//! secrecy capacity region, and the degraded-channel region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dist::{mi_bundle_one_message, OneMessageDist, OneMessageMi};
use super::grid::{grid_points, refine, refine_schedule, DegradedFamily, DistributionGrid, Family, GridDescription, OneMessageFamily};
use super::hull::simplex_lattice;
use super::{Provenance, RatePoint, RegionError, RegionTrace, Slicing, SourceDist, TracePoint};
use crate::channel::GmacChannel;

const DEGRADED_TOL: f64 = 1e-9;
/// Rounding slack before a slice bound counts as negative.
const SLICE_TOL: f64 = 1e-12;

/// Raw (unclamped) right-hand sides of the one-message bounds:
/// `R1 <= r1`, `R0 + R1 <= sum`, `Re <= re`, `R0 + Re <= re_sum`, plus `0 <= Re <= R1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneMessageBounds {
    pub r1: f64,
    pub sum: f64,
    pub re: f64,
    pub re_sum: f64,
}

impl OneMessageBounds {
    pub fn inner(mi: &OneMessageMi) -> Self {
        Self {
            r1: mi.u_y,
            sum: mi.sum,
            re: mi.u_y - mi.u_y2,
            re_sum: mi.sum - mi.u_y2,
        }
    }

    /// Needs `I(U; Y | X2, V)`, i.e. a bundle from a distribution carrying `V`.
    pub fn outer(mi: &OneMessageMi) -> Result<Self, RegionError> {
        let r1 = mi
            .u_y_given_v
            .ok_or_else(|| RegionError::Precondition("outer bound needs a distribution with p(v|q)".into()))?;
        Ok(Self { r1, ..Self::inner(mi) })
    }

    /// Corner points of the `(R1, Re)` polygon at common rate `r0`.
    /// `clamp` applies `[.]+` to the two equivocation bounds; without it a
    /// negative bound empties the slice.
    pub fn slice(&self, r0: f64, clamp: bool) -> Vec<RatePoint> {
        if !(r0 >= 0.0) {
            return vec![];
        }
        let r1_max = self.r1.min(self.sum - r0);
        if r1_max < -SLICE_TOL {
            return vec![];
        }
        let r1_max = r1_max.max(0.0);
        let (re, re_sum) = (self.re, self.re_sum - r0);
        let cap = if clamp {
            re.max(0.0).min(re_sum.max(0.0))
        } else {
            let c = re.min(re_sum);
            if c < -SLICE_TOL {
                return vec![];
            }
            c.max(0.0)
        };
        let cap = cap.min(r1_max);
        let mut pts = vec![
            RatePoint::one_message(r0, 0.0, 0.0),
            RatePoint::one_message(r0, r1_max, 0.0),
            RatePoint::one_message(r0, r1_max, cap),
            RatePoint::one_message(r0, cap, cap),
        ];
        pts.dedup();
        pts
    }

    /// Does `(r0, r1, re)` satisfy every inequality (within `tol`)?
    pub fn admits(&self, p: &RatePoint, clamp: bool, tol: f64) -> bool {
        let (re, re_sum) = if clamp {
            (self.re.max(0.0), (self.re_sum - p.r0).max(0.0) + p.r0)
        } else {
            (self.re, self.re_sum)
        };
        p.r0 >= -tol
            && p.r1 >= -tol
            && p.r1e >= -tol
            && p.r1e <= p.r1 + tol
            && p.r1 <= self.r1 + tol
            && p.r0 + p.r1 <= self.sum + tol
            && p.r1e <= re + tol
            && p.r0 + p.r1e <= re_sum + tol
    }
}

/// Inner-bound slices for one distribution, one polygon per common rate.
pub fn inner_bound_one(ch: &GmacChannel, d: &OneMessageDist, r0_grid: &[f64]) -> Result<Vec<RatePoint>, RegionError> {
    let b = OneMessageBounds::inner(&mi_bundle_one_message(ch, d)?);
    Ok(r0_grid.iter().flat_map(|&r0| b.slice(r0, true)).collect())
}

/// Outer-bound evaluator for one distribution carrying `p(v|q)`.
///
/// The equivocation bounds are clamped at zero here as well; this only enlarges
/// the evaluated set, so it stays an outer bound, and it makes the `V = Q`
/// slice coincide with the inner-bound slice.
pub fn outer_bound_one(ch: &GmacChannel, d: &OneMessageDist, r0_grid: &[f64]) -> Result<Vec<RatePoint>, RegionError> {
    let b = OneMessageBounds::outer(&mi_bundle_one_message(ch, d)?)?;
    Ok(r0_grid.iter().flat_map(|&r0| b.slice(r0, true)).collect())
}

/// Corners `(R0, R1)` of one distribution's secrecy pentagon.
pub(crate) fn secrecy_corners(mi: &OneMessageMi) -> Vec<RatePoint> {
    let a = mi.u_y - mi.u_y2;
    let b = mi.sum - mi.u_y2;
    if a < 0.0 || b < 0.0 {
        return vec![];
    }
    let m = a.min(b);
    let mut pts = vec![
        RatePoint::secrecy(0.0, m, 0.0),
        RatePoint::secrecy(b - m, m, 0.0),
        RatePoint::secrecy(b, 0.0, 0.0),
    ];
    pts.dedup();
    pts
}

fn secrecy_at(mi: &OneMessageMi, r0: f64) -> f64 {
    let a = mi.u_y - mi.u_y2;
    let b = mi.sum - mi.u_y2 - r0;
    a.min(b).max(0.0)
}

type PointsOf<'a> = dyn Fn(&OneMessageMi) -> Vec<RatePoint> + Sync + 'a;

/// Shared driver: evaluate every grid distribution, emit its points, refine the
/// support of the cloud along a lattice of directions, then hull.
fn one_message_region<F: Family<Dist = OneMessageDist>>(
    ch: &GmacChannel,
    fam: &F,
    grid: &DistributionGrid<OneMessageDist>,
    provenance: Provenance,
    points_of: &PointsOf<'_>,
    slicing: Slicing,
    warnings: Vec<String>,
) -> Result<RegionTrace, RegionError> {
    let (dists, params, mut desc, cfg) = match grid {
        DistributionGrid::Lattice(cfg) => {
            let g = grid_points(fam, cfg);
            (g.dists, Some(g.params), g.desc, Some(cfg.clone()))
        }
        DistributionGrid::Explicit(list) => (list.clone(), None, GridDescription::explicit(&fam.name(), list.len()), None),
    };
    let evaluated: Vec<Vec<RatePoint>> = dists
        .par_iter()
        .map(|d| mi_bundle_one_message(ch, d).map(|mi| points_of(&mi)))
        .collect::<Result<_, _>>()?;

    let mut cloud: Vec<TracePoint> = evaluated
        .iter()
        .enumerate()
        .flat_map(|(i, pts)| pts.iter().map(move |&p| TracePoint { point: p, grid_point: i }))
        .collect();
    let mut refined: Vec<OneMessageDist> = Vec::new();

    if let (Some(params), Some(cfg)) = (params, cfg) {
        let active: Vec<usize> = (0..5)
            .filter(|&k| cloud.iter().any(|t| t.point.coords()[k].abs() > 1e-15))
            .collect();
        if !active.is_empty() {
            let (step0, halvings) = refine_schedule(&desc, &cfg);
            let dirs: Vec<[f64; 5]> = simplex_lattice(active.len(), cfg.directions.max(1))
                .into_iter()
                .map(|w| {
                    let mut full = [0.0; 5];
                    active.iter().zip(&w).for_each(|(&k, &v)| full[k] = v);
                    full
                })
                .collect();
            let support = |pts: &[RatePoint], w: &[f64; 5]| -> Option<f64> {
                pts.iter()
                    .map(|p| p.coords().iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                    .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            };
            let results: Vec<OneMessageDist> = dirs
                .par_iter()
                .filter_map(|w| {
                    // Lowest grid index among maximizers.
                    let mut best: Option<(usize, f64)> = None;
                    for (i, pts) in evaluated.iter().enumerate() {
                        if let Some(v) = support(pts, w) {
                            if best.map_or(true, |(_, b)| v > b) {
                                best = Some((i, v));
                            }
                        }
                    }
                    let (start, _) = best?;
                    let obj = |d: &OneMessageDist| {
                        mi_bundle_one_message(ch, d).ok().and_then(|mi| support(&points_of(&mi), w))
                    };
                    let (p, _) = refine(fam, &params[start], step0, halvings, &obj);
                    fam.build(&p).ok()
                })
                .collect();
            refined = results;
        }
        let base = dists.len();
        for (j, d) in refined.iter().enumerate() {
            let mi = mi_bundle_one_message(ch, d)?;
            cloud.extend(points_of(&mi).into_iter().map(|p| TracePoint { point: p, grid_point: base + j }));
        }
        desc.refined_points = refined.len();
    }

    let lookup = |id: usize| {
        if id < dists.len() {
            Some(SourceDist::One(dists[id].clone()))
        } else {
            refined.get(id - dists.len()).map(|d| SourceDist::One(d.clone()))
        }
    };
    Ok(RegionTrace::from_cloud(provenance, cloud, &lookup, desc, warnings, slicing))
}

/// Union of inner-bound slices over the distribution grid.
pub fn inner_region_one(
    ch: &GmacChannel,
    grid: &DistributionGrid<OneMessageDist>,
    r0_grid: &[f64],
) -> Result<RegionTrace, RegionError> {
    let fam = family_for(ch, grid);
    let pts = |mi: &OneMessageMi| {
        let b = OneMessageBounds::inner(mi);
        r0_grid.iter().flat_map(|&r0| b.slice(r0, true)).collect()
    };
    one_message_region(ch, &fam, grid, Provenance::Inner, &pts, Slicing::ByR0, vec![])
}

/// The outer-bound evaluator applied across a grid. The result is the union of
/// per-distribution evaluations, not a certified outer bound.
pub fn outer_region_one(
    ch: &GmacChannel,
    grid: &DistributionGrid<OneMessageDist>,
    r0_grid: &[f64],
) -> Result<RegionTrace, RegionError> {
    let mut fam = family_for(ch, grid);
    fam.v = Some(fam.q);
    let grid = match grid {
        DistributionGrid::Explicit(list) => DistributionGrid::Explicit(
            list.iter()
                .map(|d| if d.v_given_q.is_some() { d.clone() } else { d.clone().with_v_equal_q() })
                .collect(),
        ),
        g => g.clone(),
    };
    let pts = |mi: &OneMessageMi| match OneMessageBounds::outer(mi) {
        Ok(b) => r0_grid.iter().flat_map(|&r0| b.slice(r0, true)).collect(),
        Err(_) => vec![],
    };
    let warn = vec!["outer-bound evaluator maximized over a finite grid; not a certified outer bound".to_string()];
    one_message_region(ch, &fam, &grid, Provenance::Outer, &pts, Slicing::ByR0, warn)
}

fn family_for(ch: &GmacChannel, grid: &DistributionGrid<OneMessageDist>) -> OneMessageFamily {
    match grid {
        DistributionGrid::Lattice(cfg) => OneMessageFamily::for_channel(ch, cfg),
        DistributionGrid::Explicit(list) => {
            let a = ch.alphabets();
            let d = list.first();
            OneMessageFamily {
                q: d.map_or(1, |d| d.q_card),
                u: d.map_or(a.x1, |d| d.u_card()),
                x1: a.x1,
                x2: a.x2,
                v: None,
            }
        }
    }
}

/// Secrecy capacity region in `(R0, R1)`: union of pentagons, convexified.
pub fn secrecy_capacity_region_one(
    ch: &GmacChannel,
    grid: &DistributionGrid<OneMessageDist>,
) -> Result<RegionTrace, RegionError> {
    let fam = family_for(ch, grid);
    one_message_region(ch, &fam, grid, Provenance::Secrecy, &secrecy_corners, Slicing::Full, vec![])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecyOptimum {
    pub value: f64,
    pub grid_point: Option<usize>,
    pub dist: Option<OneMessageDist>,
    pub mi: Option<OneMessageMi>,
}

/// Largest secrecy rate at common rate `r0` over the grid (plus refinement).
pub fn secrecy_capacity_at_r0(
    ch: &GmacChannel,
    r0: f64,
    grid: &DistributionGrid<OneMessageDist>,
) -> Result<SecrecyOptimum, RegionError> {
    if !(r0 >= 0.0) {
        return Err(RegionError::Precondition(format!("R0 = {r0} must be nonnegative")));
    }
    let fam = family_for(ch, grid);
    let (dists, params, cfg_desc) = match grid {
        DistributionGrid::Lattice(cfg) => {
            let g = grid_points(&fam, cfg);
            (g.dists, Some(g.params), Some((cfg.clone(), g.desc)))
        }
        DistributionGrid::Explicit(list) => (list.clone(), None, None),
    };
    let mis: Vec<OneMessageMi> = dists
        .par_iter()
        .map(|d| mi_bundle_one_message(ch, d))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, mi) in mis.iter().enumerate() {
        let v = secrecy_at(mi, r0);
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let Some((idx, mut value)) = best else {
        return Ok(SecrecyOptimum { value: 0.0, grid_point: None, dist: None, mi: None });
    };
    let mut dist = dists[idx].clone();
    let mut mi = mis[idx];
    let mut grid_point = idx;
    if let (Some(params), Some((cfg, desc))) = (params, cfg_desc) {
        if value > 0.0 {
            let (step0, halvings) = refine_schedule(&desc, &cfg);
            let obj = |d: &OneMessageDist| mi_bundle_one_message(ch, d).ok().map(|m| secrecy_at(&m, r0));
            let (p, v) = refine(&fam, &params[idx], step0, halvings, &obj);
            if v > value {
                dist = fam.build(&p)?;
                mi = mi_bundle_one_message(ch, &dist)?;
                value = v;
                grid_point = dists.len();
            }
        }
    }
    Ok(SecrecyOptimum {
        value,
        grid_point: Some(grid_point),
        dist: Some(dist),
        mi: Some(mi),
    })
}

/// Capacity-equivocation region of a degraded channel (`U = X1`). Warns, but
/// still evaluates, when the channel is not degraded.
pub fn degraded_region(
    ch: &GmacChannel,
    grid: &DistributionGrid<OneMessageDist>,
    r0_grid: &[f64],
) -> Result<RegionTrace, RegionError> {
    let mut warnings = Vec::new();
    if !ch.is_physically_degraded(DEGRADED_TOL) {
        let rep = ch.find_stochastic_degradation(DEGRADED_TOL);
        if !rep.stochastically_degraded {
            warnings.push(format!(
                "channel is not degraded (best degrading-kernel residual {:.3e}); region is only an inner bound",
                rep.residual
            ));
        }
    }
    let cfg_fam = match grid {
        DistributionGrid::Lattice(cfg) => DegradedFamily::for_channel(ch, cfg),
        DistributionGrid::Explicit(list) => {
            let a = ch.alphabets();
            DegradedFamily {
                q: list.first().map_or(1, |d| d.q_card),
                x1: a.x1,
                x2: a.x2,
            }
        }
    };
    let pts = |mi: &OneMessageMi| {
        let b = OneMessageBounds::inner(mi);
        r0_grid.iter().flat_map(|&r0| b.slice(r0, false)).collect()
    };
    one_message_region(ch, &cfg_fam, grid, Provenance::Inner, &pts, Slicing::ByR0, warnings)
}
