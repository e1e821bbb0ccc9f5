//! Two confidential messages: equivocation sets, the rate-equivocation inner
//! bound, and the perfect-secrecy rate region.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dist::{mi_bundle_two_message, TwoMessageDist, TwoMessageMi};
use super::grid::{grid_points, refine, refine_schedule, DistributionGrid, Family, GridDescription, TwoMessageFamily};
use super::hull::simplex_lattice;
use super::{Provenance, RatePoint, RegionError, RegionTrace, SourceDist, TracePoint};
use crate::channel::GmacChannel;

/// Grid resolution of the union-form oracle: `(R1', R2')` move in steps of
/// 1/256 of their feasible range.
pub const UNION_FORM_RESOLUTION: usize = 256;
const MEMBER_TOL: f64 = 1e-12;

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `(R0, R1, R2)` inside the MAC pentagon of this bundle?
pub fn in_mac(mi: &TwoMessageMi, r0: f64, r1: f64, r2: f64, tol: f64) -> bool {
    r0 >= -tol
        && r1 >= -tol
        && r2 >= -tol
        && r1 <= mi.u_y + tol
        && r2 <= mi.v_y + tol
        && r1 + r2 <= mi.uv_y + tol
        && r0 + r1 + r2 <= mi.uvq_y + tol
}

fn check_mac(mi: &TwoMessageMi, r0: f64, r1: f64, r2: f64) -> Result<(), RegionError> {
    if in_mac(mi, r0, r1, r2, MEMBER_TOL) {
        Ok(())
    } else {
        Err(RegionError::Precondition(format!(
            "rate triple ({r0}, {r1}, {r2}) lies outside the MAC region"
        )))
    }
}

/// Equivocation pairs for a fixed rate triple, as a union of three polytopes:
/// a joint one and the two axis segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivocationSet {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Cap on `R1e` shared by the joint set and the `R2e = 0` segment.
    pub r1e_max: f64,
    /// Cap on `R2e` shared by the joint set and the `R1e = 0` segment.
    pub r2e_max: f64,
    /// Joint cap on `R1e + R2e` (joint set only).
    pub sum_max: f64,
}

pub fn equivocation_set_explicit(r0: f64, r1: f64, r2: f64, mi: &TwoMessageMi) -> Result<EquivocationSet, RegionError> {
    check_mac(mi, r0, r1, r2)?;
    let (a, b) = (mi.leak1, mi.leak2);
    let r1e_max = r1
        .min(pos(mi.u_y - a))
        .min(pos(mi.uv_y - r2 - a))
        .min(pos(mi.uvq_y - r0 - r2 - a));
    let r2e_max = r2
        .min(pos(mi.v_y - b))
        .min(pos(mi.uv_y - r1 - b))
        .min(pos(mi.uvq_y - r0 - r1 - b));
    let sum_max = pos(mi.uv_y - a - b).min(pos(mi.uvq_y - r0 - a - b));
    Ok(EquivocationSet { r0, r1, r2, r1e_max: r1e_max.max(0.0), r2e_max: r2e_max.max(0.0), sum_max })
}

impl EquivocationSet {
    pub fn contains(&self, r1e: f64, r2e: f64, tol: f64) -> bool {
        if r1e < -tol || r2e < -tol {
            return false;
        }
        let joint = r1e <= self.r1e_max + tol && r2e <= self.r2e_max + tol && r1e + r2e <= self.sum_max + tol;
        let axis1 = r2e <= tol && r1e <= self.r1e_max + tol;
        let axis2 = r1e <= tol && r2e <= self.r2e_max + tol;
        joint || axis1 || axis2
    }

    /// Maximal vertices of the set (the down-closure recovers the rest).
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let (m1, m2, s) = (self.r1e_max, self.r2e_max, self.sum_max);
        let x_top = m1.min(s);
        let y_top = m2.min(s);
        let mut v = vec![
            (m1, 0.0),
            (x_top, m2.min(s - x_top).max(0.0)),
            (m1.min(s - y_top).max(0.0), y_top),
            (0.0, m2),
        ];
        v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        v.dedup();
        let all = v.clone();
        v.retain(|&(x, y)| !all.iter().any(|&(a, b)| (a >= x && b >= y) && (a > x || b > y)));
        v
    }
}

/// Union over the widened index set of per-`(R1', R2')` boxes, searched by
/// brute force on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnionFormSet {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub mi: TwoMessageMi,
    pub resolution: usize,
    /// Also try the two query-dependent candidates `R1' = leak1 + R1e`,
    /// `R2' = leak2 + R2e`, which makes the search exact.
    pub adaptive: bool,
}

pub fn equivocation_set_union_form(r0: f64, r1: f64, r2: f64, mi: &TwoMessageMi) -> Result<UnionFormSet, RegionError> {
    check_mac(mi, r0, r1, r2)?;
    Ok(UnionFormSet {
        r0,
        r1,
        r2,
        mi: *mi,
        resolution: UNION_FORM_RESOLUTION,
        adaptive: true,
    })
}

impl UnionFormSet {
    fn r1p_cap(&self) -> f64 {
        let m = &self.mi;
        m.u_y.min(m.uv_y - self.r2).min(m.uvq_y - self.r0 - self.r2)
    }

    fn r2p_cap(&self) -> f64 {
        let m = &self.mi;
        m.v_y.min(m.uv_y - self.r1).min(m.uvq_y - self.r0 - self.r1)
    }

    /// Is `(R1', R2')` in the widened index set?
    pub fn in_index_set(&self, r1p: f64, r2p: f64, tol: f64) -> bool {
        let m = &self.mi;
        r1p <= self.r1p_cap() + tol
            && r2p <= self.r2p_cap() + tol
            && r1p + r2p <= m.uv_y + tol
            && self.r0 + r1p + r2p <= m.uvq_y + tol
    }

    /// The box of equivocation pairs granted by one index point.
    pub fn box_for(&self, r1p: f64, r2p: f64) -> (f64, f64) {
        (self.r1.min(pos(r1p - self.mi.leak1)), self.r2.min(pos(r2p - self.mi.leak2)))
    }

    pub fn contains(&self, r1e: f64, r2e: f64, tol: f64) -> bool {
        if r1e < -tol || r2e < -tol {
            return false;
        }
        // Inside the MAC region, R2' = 0 is admissible for every R1' in [0, c1],
        // so negative index values never enlarge the union.
        let (c1, c2) = (pos(self.r1p_cap()), pos(self.r2p_cap()));
        let n = self.resolution.max(1);
        let mut r1_candidates: Vec<f64> = (0..=n).map(|k| c1 * k as f64 / n as f64).collect();
        if self.adaptive {
            r1_candidates.push(self.mi.leak1 + r1e.max(0.0));
        }
        let m = &self.mi;
        for r1p in r1_candidates {
            if r1p > c1 + tol {
                continue;
            }
            // Boxes grow with R2', so only the largest admissible R2' matters.
            let limit = c2.min(m.uv_y - r1p).min(m.uvq_y - self.r0 - r1p);
            if limit < -tol {
                continue;
            }
            let mut r2p = if c2 > 0.0 {
                let mut k = (limit.max(0.0) / c2 * n as f64 + 1e-9).floor().min(n as f64);
                if c2 * k / n as f64 > limit + tol && k > 0.0 {
                    k -= 1.0;
                }
                c2 * k / n as f64
            } else {
                0.0
            };
            if self.adaptive {
                let extra = m.leak2 + r2e.max(0.0);
                if extra <= limit + tol && extra > r2p {
                    r2p = extra;
                }
            }
            let (b1, b2) = self.box_for(r1p, r2p);
            if r1e <= b1 + tol && r2e <= b2 + tol {
                return true;
            }
        }
        false
    }
}

/// Candidate rate triple drawn uniformly from the MAC region by rejection.
pub fn random_mac_triple<R: Rng + ?Sized>(mi: &TwoMessageMi, rng: &mut R) -> (f64, f64, f64) {
    for _ in 0..10_000 {
        let r0 = rng.gen::<f64>() * mi.uvq_y;
        let r1 = rng.gen::<f64>() * mi.u_y;
        let r2 = rng.gen::<f64>() * mi.v_y;
        if in_mac(mi, r0, r1, r2, 0.0) {
            return (r0, r1, r2);
        }
    }
    (0.0, 0.0, 0.0)
}

/// Rate-equivocation inner bound of one distribution over a grid of rate
/// triples; triples outside the MAC region are skipped.
pub fn two_message_inner_bound(
    ch: &GmacChannel,
    d: &TwoMessageDist,
    rate_grid: &[(f64, f64, f64)],
) -> Result<RegionTrace, RegionError> {
    let mi = mi_bundle_two_message(ch, d)?;
    let mut cloud = Vec::new();
    for &(r0, r1, r2) in rate_grid {
        if !in_mac(&mi, r0, r1, r2, MEMBER_TOL) {
            continue;
        }
        let set = equivocation_set_explicit(r0, r1, r2, &mi)?;
        for (r1e, r2e) in set.vertices() {
            cloud.push(TracePoint {
                point: RatePoint { r0, r1, r2, r1e, r2e },
                grid_point: 0,
            });
        }
    }
    let src = SourceDist::Two(d.clone());
    let lookup = move |id: usize| (id == 0).then(|| src.clone());
    let desc = GridDescription::explicit("p(q)p(u|q)p(x1|u)p(v|q)p(x2|v) (single)", 1);
    Ok(RegionTrace::from_cloud(Provenance::Inner, cloud, &lookup, desc, vec![], super::Slicing::Raw))
}

/// Does a rate-equivocation point satisfy the two-message inner bound for this bundle?
pub fn admits_inner_two(mi: &TwoMessageMi, p: &RatePoint, tol: f64) -> bool {
    in_mac(mi, p.r0, p.r1, p.r2, tol)
        && equivocation_set_explicit(p.r0.max(0.0), p.r1.max(0.0), p.r2.max(0.0), mi)
            .map(|s| s.contains(p.r1e, p.r2e, tol))
            .unwrap_or(false)
}

/// Corner points `(R1, R2)` at common rate `r0` of the three secrecy sub-regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecySubregions {
    pub joint: Vec<RatePoint>,
    pub user1_only: Option<RatePoint>,
    pub user2_only: Option<RatePoint>,
}

impl SecrecySubregions {
    pub fn all(&self) -> Vec<RatePoint> {
        let mut v = self.joint.clone();
        v.extend(self.user1_only);
        v.extend(self.user2_only);
        v
    }
}

pub fn secrecy_subregions_two(mi: &TwoMessageMi, r0: f64) -> SecrecySubregions {
    let (a, b) = (mi.leak1, mi.leak2);
    let c1 = mi.u_y - a;
    let c2 = mi.v_y - b;
    let s = (mi.uv_y - a - b).min(mi.uvq_y - r0 - a - b);
    let joint = if r0 >= 0.0 && c1 >= 0.0 && c2 >= 0.0 && s >= 0.0 {
        box_cut_vertices(r0, c1, c2, s)
    } else {
        vec![]
    };
    let t1 = c1.min(mi.uvq_y - a - r0);
    let t2 = c2.min(mi.uvq_y - b - r0);
    SecrecySubregions {
        joint,
        user1_only: (r0 >= 0.0 && t1 >= 0.0).then(|| RatePoint::secrecy(r0, t1, 0.0)),
        user2_only: (r0 >= 0.0 && t2 >= 0.0).then(|| RatePoint::secrecy(r0, 0.0, t2)),
    }
}

// Vertices of {0 <= x <= c1, 0 <= y <= c2, x + y <= s}.
fn box_cut_vertices(r0: f64, c1: f64, c2: f64, s: f64) -> Vec<RatePoint> {
    let x = c1.min(s);
    let y = c2.min(s);
    let mut v = vec![
        RatePoint::secrecy(r0, 0.0, 0.0),
        RatePoint::secrecy(r0, x, 0.0),
        RatePoint::secrecy(r0, x, c2.min(s - x)),
        RatePoint::secrecy(r0, c1.min(s - y), y),
        RatePoint::secrecy(r0, 0.0, y),
    ];
    v.dedup();
    v
}

/// Vertices `(R1, R2)` of the MAC pentagon at common rate `r0` (no secrecy).
pub fn mac_pentagon(mi: &TwoMessageMi, r0: f64) -> Vec<RatePoint> {
    let s = mi.uv_y.min(mi.uvq_y - r0);
    if r0 < 0.0 || s < 0.0 {
        return vec![];
    }
    let mk = |r1: f64, r2: f64| RatePoint { r0, r1, r2, r1e: 0.0, r2e: 0.0 };
    let x = mi.u_y.min(s);
    let y = mi.v_y.min(s);
    let mut v = vec![mk(0.0, 0.0), mk(x, 0.0), mk(x, mi.v_y.min(s - x)), mk(mi.u_y.min(s - y), y), mk(0.0, y)];
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fig8Case {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl Fig8Case {
    pub fn number(self) -> u8 {
        match self {
            Fig8Case::Case1 => 1,
            Fig8Case::Case2 => 2,
            Fig8Case::Case3 => 3,
            Fig8Case::Case4 => 4,
        }
    }
}

/// Geometry class of the secrecy region, from
/// `I(V;Y|Q) > I(V;Y1|X1,U,Q)` and `I(U;Y|Q) > I(U;Y2|X2,V,Q)`.
pub fn fig8_case(mi: &TwoMessageMi) -> Fig8Case {
    let v_ok = mi.v_y_marg > mi.leak2;
    let u_ok = mi.u_y_marg > mi.leak1;
    match (v_ok, u_ok) {
        (true, true) => Fig8Case::Case1,
        (false, true) => Fig8Case::Case2,
        (true, false) => Fig8Case::Case3,
        (false, false) => Fig8Case::Case4,
    }
}

fn two_message_dists(
    ch: &GmacChannel,
    grid: &DistributionGrid<TwoMessageDist>,
) -> (TwoMessageFamily, Vec<TwoMessageDist>, Option<Vec<Vec<f64>>>, GridDescription) {
    match grid {
        DistributionGrid::Lattice(cfg) => {
            let fam = TwoMessageFamily::for_channel(ch, cfg);
            let g = grid_points(&fam, cfg);
            (fam, g.dists, Some(g.params), g.desc)
        }
        DistributionGrid::Explicit(list) => {
            let a = ch.alphabets();
            let fam = TwoMessageFamily {
                q: list.first().map_or(1, |d| d.q_card()),
                u: list.first().map_or(a.x1, |d| d.u_given_q.cols),
                v: list.first().map_or(a.x2, |d| d.v_given_q.cols),
                x1: a.x1,
                x2: a.x2,
            };
            let desc = GridDescription::explicit(&fam.name(), list.len());
            (fam, list.clone(), None, desc)
        }
    }
}

/// Perfect-secrecy rate region for two confidential messages: union over the
/// grid of the three sub-regions, hulled per common-rate slice.
pub fn secrecy_rate_region_two(
    ch: &GmacChannel,
    grid: &DistributionGrid<TwoMessageDist>,
    r0_grid: &[f64],
) -> Result<RegionTrace, RegionError> {
    let (fam, dists, params, mut desc) = two_message_dists(ch, grid);
    let mis: Vec<TwoMessageMi> = dists
        .par_iter()
        .map(|d| mi_bundle_two_message(ch, d))
        .collect::<Result<_, _>>()?;
    let points_of = |mi: &TwoMessageMi| -> Vec<RatePoint> {
        r0_grid.iter().flat_map(|&r0| secrecy_subregions_two(mi, r0).all()).collect()
    };
    let evaluated: Vec<Vec<RatePoint>> = mis.iter().map(points_of).collect();
    let mut cloud: Vec<TracePoint> = evaluated
        .iter()
        .enumerate()
        .flat_map(|(i, pts)| pts.iter().map(move |&p| TracePoint { point: p, grid_point: i }))
        .collect();

    let mut refined: Vec<TwoMessageDist> = Vec::new();
    if let (Some(params), DistributionGrid::Lattice(cfg)) = (params, grid) {
        let (step0, halvings) = refine_schedule(&desc, cfg);
        // Directions over (R0, R1, R2).
        let dirs: Vec<[f64; 3]> = simplex_lattice(3, cfg.directions.max(1))
            .into_iter()
            .map(|w| [w[0], w[1], w[2]])
            .collect();
        let support = |pts: &[RatePoint], w: &[f64; 3]| {
            pts.iter()
                .map(|p| w[0] * p.r0 + w[1] * p.r1 + w[2] * p.r2)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        };
        refined = dirs
            .par_iter()
            .filter_map(|w| {
                let mut best: Option<(usize, f64)> = None;
                for (i, pts) in evaluated.iter().enumerate() {
                    if let Some(v) = support(pts, w) {
                        if best.map_or(true, |(_, b)| v > b) {
                            best = Some((i, v));
                        }
                    }
                }
                let (start, _) = best?;
                let obj = |d: &TwoMessageDist| mi_bundle_two_message(ch, d).ok().and_then(|m| support(&points_of(&m), w));
                let (p, _) = refine(&fam, &params[start], step0, halvings, &obj);
                fam.build(&p).ok()
            })
            .collect();
        let base = dists.len();
        for (j, d) in refined.iter().enumerate() {
            let mi = mi_bundle_two_message(ch, d)?;
            cloud.extend(points_of(&mi).into_iter().map(|p| TracePoint { point: p, grid_point: base + j }));
        }
        desc.refined_points = refined.len();
    }
    let lookup = |id: usize| {
        if id < dists.len() {
            Some(SourceDist::Two(dists[id].clone()))
        } else {
            refined.get(id - dists.len()).map(|d| SourceDist::Two(d.clone()))
        }
    };
    Ok(RegionTrace::from_cloud(Provenance::Secrecy, cloud, &lookup, desc, vec![], super::Slicing::ByR0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecyFlags {
    pub user1: bool,
    pub user2: bool,
    /// Grid-point ids of the witnesses (they need not coincide).
    pub witness1: Option<usize>,
    pub witness2: Option<usize>,
}

/// Searches the grid for distributions with `I(U;Y|V,Q) > I(U;Y2|X2,V,Q)`
/// (user 1) and `I(V;Y|U,Q) > I(V;Y1|X1,U,Q)` (user 2).
pub fn positive_secrecy_possible(
    ch: &GmacChannel,
    grid: &DistributionGrid<TwoMessageDist>,
) -> Result<SecrecyFlags, RegionError> {
    let (fam, dists, params, desc) = two_message_dists(ch, grid);
    let mis: Vec<TwoMessageMi> = dists
        .par_iter()
        .map(|d| mi_bundle_two_message(ch, d))
        .collect::<Result<_, _>>()?;
    let gap1 = |m: &TwoMessageMi| m.u_y - m.leak1;
    let gap2 = |m: &TwoMessageMi| m.v_y - m.leak2;
    let search = |gap: &(dyn Fn(&TwoMessageMi) -> f64 + Sync)| -> Option<usize> {
        if let Some(i) = mis.iter().position(|m| gap(m) > MEMBER_TOL) {
            return Some(i);
        }
        // No grid witness: push the best grid point uphill before giving up.
        let (params, DistributionGrid::Lattice(cfg)) = (params.as_ref()?, grid) else {
            return None;
        };
        let start = mis
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, m)| if gap(m) > b.1 { (i, gap(m)) } else { b })
            .0;
        let (step0, halvings) = refine_schedule(&desc, cfg);
        let obj = |d: &TwoMessageDist| mi_bundle_two_message(ch, d).ok().map(|m| gap(&m));
        let (_, v) = refine(&fam, &params[start], step0, halvings, &obj);
        (v > MEMBER_TOL).then_some(dists.len())
    };
    let witness1 = search(&gap1);
    let witness2 = search(&gap2);
    Ok(SecrecyFlags {
        user1: witness1.is_some(),
        user2: witness2.is_some(),
        witness1,
        witness2,
    })
}
