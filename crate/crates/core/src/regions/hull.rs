//! Down-closed convex hulls of rate points.
//!
//! A region generated by valid rate points is their convex hull, closed
//! downward in `(R0, R1, R1e, R2, R2e)` and cut by `R1e <= R1`, `R2e <= R2`.
//! Membership then reduces to dominance by a convex combination: a small LP.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{RatePoint, RegionError};

pub(crate) const DIMS: usize = 5;
const ACTIVE_EPS: f64 = 1e-15;
const HULL_TOL: f64 = 1e-12;
// Beyond this many Pareto-maximal points, thin the cloud with support directions
// before the (quadratic) LP elimination.
const LP_ELIMINATION_LIMIT: usize = 1500;

// Coordinates that vary, skipping exact copies of an earlier one (e.g. R1e = R1
// under perfect secrecy).
fn active_dims(points: &[RatePoint]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for k in 0..DIMS {
        if !points.iter().any(|p| p.coords()[k].abs() > ACTIVE_EPS) {
            continue;
        }
        let copy = out.iter().any(|&j| points.iter().all(|p| p.coords()[j] == p.coords()[k]));
        if !copy {
            out.push(k);
        }
    }
    out
}

/// Extreme points of the down-closed convex hull of `points`.
///
/// Points whose removal leaves the hull unchanged (dominated, interior, or on a
/// facet between other points) are dropped. Output order is deterministic.
pub fn convexify(points: &[RatePoint]) -> Vec<RatePoint> {
    let mut pts: Vec<RatePoint> = points
        .iter()
        .filter(|p| p.coords().iter().all(|v| v.is_finite()))
        .copied()
        .collect();
    if pts.is_empty() {
        return pts;
    }
    let active = active_dims(&pts);
    match active.len() {
        0 => vec![pts[0]],
        1 => {
            let k = active[0];
            let best = pts
                .iter()
                .copied()
                .fold(pts[0], |b, p| if p.coords()[k] > b.coords()[k] { p } else { b });
            vec![best]
        }
        2 => staircase_hull(&pts, active[0], active[1]),
        _ => {
            pts = pareto_filter(&pts, &active);
            if pts.len() > LP_ELIMINATION_LIMIT {
                pts = support_thin(&pts, &active, 24);
            }
            lp_eliminate(pts, &active)
        }
    }
}

// Upper-right concave chain in two coordinates.
fn staircase_hull(points: &[RatePoint], i: usize, j: usize) -> Vec<RatePoint> {
    let xy = |p: &RatePoint| {
        let c = p.coords();
        (c[i], c[j])
    };
    let mut sorted: Vec<RatePoint> = points.to_vec();
    // x ascending, then y ascending, so the reverse scan meets the tallest point of each column first.
    sorted.sort_by(|a, b| {
        let (ax, ay) = xy(a);
        let (bx, by) = xy(b);
        ax.partial_cmp(&bx).unwrap().then(ay.partial_cmp(&by).unwrap())
    });
    // Keep only the staircase of maximal points: scanning from the right, y must strictly grow.
    let mut maximal: Vec<RatePoint> = Vec::new();
    let mut best_y = f64::NEG_INFINITY;
    for p in sorted.iter().rev() {
        let (_, y) = xy(p);
        if y > best_y + HULL_TOL {
            maximal.push(*p);
            best_y = y;
        }
    }
    maximal.reverse(); // x ascending, y descending
    let mut hull: Vec<RatePoint> = Vec::new();
    for p in maximal {
        while hull.len() >= 2 {
            let (ax, ay) = xy(&hull[hull.len() - 2]);
            let (bx, by) = xy(&hull[hull.len() - 1]);
            let (cx, cy) = xy(&p);
            // Remove b unless a -> b -> c turns clockwise (strictly concave).
            let cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
            if cross >= -HULL_TOL * (1.0 + (cx - ax).abs() + (cy - ay).abs()) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn dominates(a: &[f64; DIMS], b: &[f64; DIMS], active: &[usize]) -> bool {
    active.iter().all(|&k| a[k] >= b[k] - HULL_TOL)
}

fn pareto_filter(points: &[RatePoint], active: &[usize]) -> Vec<RatePoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let sum = |p: &RatePoint| active.iter().map(|&k| p.coords()[k]).sum::<f64>();
    // Larger coordinate sums first, so a dominating point is always seen before what it dominates.
    order.sort_by(|&a, &b| sum(&points[b]).partial_cmp(&sum(&points[a])).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<RatePoint> = Vec::new();
    for idx in order {
        let c = points[idx].coords();
        if !kept.iter().any(|k| dominates(&k.coords(), &c, active)) {
            kept.push(points[idx]);
        }
    }
    kept
}

// Keeps the maximizers of w . x for a lattice of nonnegative directions on the
// simplex over the active coordinates.
fn support_thin(points: &[RatePoint], active: &[usize], resolution: usize) -> Vec<RatePoint> {
    let mut keep = vec![false; points.len()];
    for w in simplex_lattice(active.len(), resolution) {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let c = p.coords();
            let v: f64 = active.iter().zip(&w).map(|(&k, wk)| wk * c[k]).sum();
            if v > best_val + HULL_TOL {
                best_val = v;
                best = i;
            }
        }
        keep[best] = true;
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Points of the simplex `{w >= 0, sum w = 1}` in `d` dimensions with denominator `n`.
pub(crate) fn simplex_lattice(d: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for i in (0..=left).rev() {
            cur.push(i);
            rec(d - 1, left - i, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    if d == 0 {
        return vec![];
    }
    rec(d, n, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|v| v.into_iter().map(|c| c as f64 / n as f64).collect())
        .collect()
}

fn lp_eliminate(mut pts: Vec<RatePoint>, active: &[usize]) -> Vec<RatePoint> {
    let mut i = 0;
    while i < pts.len() {
        let target = pts[i].coords();
        let others: Vec<[f64; DIMS]> = pts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p.coords())
            .collect();
        if !others.is_empty() && in_down_hull(&others, &target, active, HULL_TOL).unwrap_or(false) {
            pts.remove(i);
        } else {
            i += 1;
        }
    }
    pts
}

/// Is `target` in the down-closed convex hull of `cloud` (restricted to `active` coordinates)?
pub(crate) fn in_down_hull(
    cloud: &[[f64; DIMS]],
    target: &[f64; DIMS],
    active: &[usize],
    tol: f64,
) -> Result<bool, RegionError> {
    if cloud.is_empty() {
        return Ok(false);
    }
    if active.iter().all(|&k| target[k] <= tol) {
        return Ok(true);
    }
    // Quick accept: a single dominating point.
    if cloud.iter().any(|c| active.iter().all(|&k| c[k] >= target[k] - tol)) {
        return Ok(true);
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = cloud.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let ones: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(&ones, ComparisonOp::Eq, 1.0);
    for &k in active {
        let row: Vec<_> = vars.iter().zip(cloud).map(|(&v, c)| (v, c[k])).collect();
        lp.add_constraint(&row, ComparisonOp::Ge, target[k] - tol);
    }
    match lp.solve() {
        Ok(microlp::SolveOutcome::Solution(_)) => Ok(true),
        Ok(_) => Err(RegionError::Lp("solver interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(false),
        Err(e) => Err(RegionError::Lp(e.to_string())),
    }
}

/// Maximizes `objective . x` over the down-closed hull of `cloud`, subject to
/// `row . x >= rhs` for each extra constraint. `None` when infeasible.
pub(crate) fn maximize_linear(
    cloud: &[[f64; DIMS]],
    objective: &[f64; DIMS],
    constraints: &[([f64; DIMS], f64)],
) -> Result<Option<f64>, RegionError> {
    if cloud.is_empty() {
        return Ok(None);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = cloud
        .iter()
        .map(|c| {
            let obj: f64 = c.iter().zip(objective).map(|(a, b)| a * b).sum();
            lp.add_var(obj, (0.0, f64::INFINITY))
        })
        .collect();
    let ones: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(&ones, ComparisonOp::Eq, 1.0);
    for (row, rhs) in constraints {
        let expr: Vec<_> = vars
            .iter()
            .zip(cloud)
            .map(|(&v, c)| (v, c.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        lp.add_constraint(&expr, ComparisonOp::Ge, *rhs);
    }
    match lp.solve() {
        Ok(microlp::SolveOutcome::Solution(sol)) => Ok(Some(sol.objective())),
        Ok(_) => Err(RegionError::Lp("solver interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(RegionError::Lp(e.to_string())),
    }
}
