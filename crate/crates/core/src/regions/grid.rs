//! Search over auxiliary distributions: simplex lattices per kernel row, then
//! local refinement by moving mass between entries of a row.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dist::{Kernel, OneMessageDist, TwoMessageDist};
use super::hull::simplex_lattice;
use super::RegionError;
use crate::channel::GmacChannel;

const IMPROVE_EPS: f64 = 1e-13;
const MAX_PASSES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub q_card: usize,
    /// Defaults to `|X1| + 1`.
    pub u_card: Option<usize>,
    /// Defaults to `|X2| + 1`.
    pub v_card: Option<usize>,
    /// Lattice denominator: each kernel row lives on `{k / lattice_k}`.
    pub lattice_k: usize,
    /// Maximum number of grid points evaluated.
    pub budget: usize,
    pub refine_halvings: u32,
    pub seed: u64,
    /// Resolution of the support directions used to pick refinement starts.
    pub directions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            q_card: 2,
            u_card: None,
            v_card: None,
            lattice_k: 16,
            budget: 20_000,
            refine_halvings: 6,
            seed: 0,
            directions: 8,
        }
    }
}

/// Either a lattice search or a fixed list of distributions (no refinement).
#[derive(Debug, Clone)]
pub enum DistributionGrid<D> {
    Lattice(GridConfig),
    Explicit(Vec<D>),
}

impl<D> Default for DistributionGrid<D> {
    fn default() -> Self {
        DistributionGrid::Lattice(GridConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescription {
    pub family: String,
    pub lattice_k_requested: usize,
    pub lattice_k_used: usize,
    /// True when the whole lattice was enumerated, false when it was sampled.
    pub enumerated: bool,
    pub grid_points: usize,
    pub refined_points: usize,
    pub refine_halvings: u32,
    pub seed: u64,
}

impl GridDescription {
    pub(crate) fn explicit(family: &str, n: usize) -> Self {
        Self {
            family: family.to_string(),
            lattice_k_requested: 0,
            lattice_k_used: 0,
            enumerated: true,
            grid_points: n,
            refined_points: 0,
            refine_halvings: 0,
            seed: 0,
        }
    }
}

/// A parameterized class of auxiliary distributions: a list of row-stochastic blocks.
pub trait Family: Sync {
    type Dist: Clone + Send + Sync;
    fn name(&self) -> String;
    /// `(rows, cols)` per block, in parameter order.
    fn blocks(&self) -> Vec<(usize, usize)>;
    fn build(&self, params: &[f64]) -> Result<Self::Dist, RegionError>;
}

fn split_blocks<'a>(blocks: &[(usize, usize)], params: &'a [f64]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut at = 0;
    for &(r, c) in blocks {
        out.push(&params[at..at + r * c]);
        at += r * c;
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct OneMessageFamily {
    pub q: usize,
    pub u: usize,
    pub x1: usize,
    pub x2: usize,
    /// Cardinality of the outer bound's `V`, if attached.
    pub v: Option<usize>,
}

impl OneMessageFamily {
    pub fn for_channel(ch: &GmacChannel, cfg: &GridConfig) -> Self {
        let a = ch.alphabets();
        Self {
            q: cfg.q_card,
            u: cfg.u_card.unwrap_or(a.x1 + 1),
            x1: a.x1,
            x2: a.x2,
            v: None,
        }
    }
}

impl Family for OneMessageFamily {
    type Dist = OneMessageDist;
    fn name(&self) -> String {
        format!("p(q,x2)p(u|q)p(x1|u) |Q|={} |U|={}", self.q, self.u)
            + &self.v.map(|v| format!(" p(v|q) |V|={v}")).unwrap_or_default()
    }
    fn blocks(&self) -> Vec<(usize, usize)> {
        let mut b = vec![(1, self.q * self.x2), (self.q, self.u), (self.u, self.x1)];
        if let Some(v) = self.v {
            b.push((self.q, v));
        }
        b
    }
    fn build(&self, params: &[f64]) -> Result<OneMessageDist, RegionError> {
        let p = split_blocks(&self.blocks(), params);
        let v = match self.v {
            Some(nv) => Some(Kernel::new(self.q, nv, p[3].to_vec())?),
            None => None,
        };
        OneMessageDist::new(
            self.q,
            Kernel::new(1, self.q * self.x2, p[0].to_vec())?,
            Kernel::new(self.q, self.u, p[1].to_vec())?,
            Kernel::new(self.u, self.x1, p[2].to_vec())?,
            v,
        )
    }
}

/// `p(q, x2) p(x1 | q)` with `U = X1`.
#[derive(Debug, Clone, Copy)]
pub struct DegradedFamily {
    pub q: usize,
    pub x1: usize,
    pub x2: usize,
}

impl DegradedFamily {
    pub fn for_channel(ch: &GmacChannel, cfg: &GridConfig) -> Self {
        let a = ch.alphabets();
        Self { q: cfg.q_card, x1: a.x1, x2: a.x2 }
    }
}

impl Family for DegradedFamily {
    type Dist = OneMessageDist;
    fn name(&self) -> String {
        format!("p(q,x2)p(x1|q) |Q|={}", self.q)
    }
    fn blocks(&self) -> Vec<(usize, usize)> {
        vec![(1, self.q * self.x2), (self.q, self.x1)]
    }
    fn build(&self, params: &[f64]) -> Result<OneMessageDist, RegionError> {
        let p = split_blocks(&self.blocks(), params);
        OneMessageDist::degraded(
            self.q,
            Kernel::new(1, self.q * self.x2, p[0].to_vec())?,
            Kernel::new(self.q, self.x1, p[1].to_vec())?,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TwoMessageFamily {
    pub q: usize,
    pub u: usize,
    pub v: usize,
    pub x1: usize,
    pub x2: usize,
}

impl TwoMessageFamily {
    pub fn for_channel(ch: &GmacChannel, cfg: &GridConfig) -> Self {
        let a = ch.alphabets();
        Self {
            q: cfg.q_card,
            u: cfg.u_card.unwrap_or(a.x1 + 1),
            v: cfg.v_card.unwrap_or(a.x2 + 1),
            x1: a.x1,
            x2: a.x2,
        }
    }
}

impl Family for TwoMessageFamily {
    type Dist = TwoMessageDist;
    fn name(&self) -> String {
        format!("p(q)p(u|q)p(x1|u)p(v|q)p(x2|v) |Q|={} |U|={} |V|={}", self.q, self.u, self.v)
    }
    fn blocks(&self) -> Vec<(usize, usize)> {
        vec![(1, self.q), (self.q, self.u), (self.u, self.x1), (self.q, self.v), (self.v, self.x2)]
    }
    fn build(&self, params: &[f64]) -> Result<TwoMessageDist, RegionError> {
        let p = split_blocks(&self.blocks(), params);
        TwoMessageDist::new(
            Kernel::new(1, self.q, p[0].to_vec())?,
            Kernel::new(self.q, self.u, p[1].to_vec())?,
            Kernel::new(self.u, self.x1, p[2].to_vec())?,
            Kernel::new(self.q, self.v, p[3].to_vec())?,
            Kernel::new(self.v, self.x2, p[4].to_vec())?,
        )
    }
}

/// Grid points of a family, in grid-index order, with their parameters.
pub(crate) struct GridPoints<D> {
    pub params: Vec<Vec<f64>>,
    pub dists: Vec<D>,
    pub desc: GridDescription,
}

fn lattice_count(blocks: &[(usize, usize)], k: usize) -> f64 {
    blocks
        .iter()
        .map(|&(r, c)| (simplex_lattice(c, k).len() as f64).powi(r as i32))
        .product()
}

pub(crate) fn grid_points<F: Family>(fam: &F, cfg: &GridConfig) -> GridPoints<F::Dist> {
    let blocks = fam.blocks();
    let requested = cfg.lattice_k.max(1);
    // Coarsen while the full lattice exceeds the budget, but never below k = 2:
    // vertex-only lattices make every auxiliary deterministic.
    let mut k = requested;
    while lattice_count(&blocks, k) > cfg.budget as f64 && k > 2 {
        k /= 2;
    }
    let enumerate = lattice_count(&blocks, k) <= cfg.budget as f64;
    if !enumerate {
        k = requested;
    }
    // Row lattices per distinct column count.
    let rows: Vec<usize> = blocks.iter().flat_map(|&(r, c)| std::iter::repeat(c).take(r)).collect();
    let lattices: Vec<Vec<Vec<f64>>> = rows.iter().map(|&c| simplex_lattice(c, k)).collect();

    let assemble = |choice: &[usize]| -> Vec<f64> {
        choice
            .iter()
            .zip(&lattices)
            .flat_map(|(&i, lat)| lat[i].iter().copied())
            .collect()
    };
    let mut params = Vec::new();
    if enumerate {
        let radix: Vec<usize> = lattices.iter().map(|l| l.len()).collect();
        let total: usize = radix.iter().product();
        let mut idx = vec![0usize; radix.len()];
        for n in 0..total {
            let mut rest = n;
            for d in (0..radix.len()).rev() {
                idx[d] = rest % radix[d];
                rest /= radix[d];
            }
            params.push(assemble(&idx));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.budget {
            let choice: Vec<usize> = lattices.iter().map(|l| rng.gen_range(0..l.len())).collect();
            params.push(assemble(&choice));
        }
    }
    // Lattice points always build; a failure would be a family bug.
    let dists: Vec<F::Dist> = params
        .par_iter()
        .map(|p| fam.build(p).expect("lattice point is a valid distribution"))
        .collect();
    let desc = GridDescription {
        family: fam.name(),
        lattice_k_requested: requested,
        lattice_k_used: k,
        enumerated: enumerate,
        grid_points: params.len(),
        refined_points: 0,
        refine_halvings: cfg.refine_halvings,
        seed: cfg.seed,
    };
    GridPoints { params, dists, desc }
}

/// Coordinate ascent on `objective`, moving `delta` mass between two entries of
/// one row; `delta` starts at `step0` and halves `halvings` times.
pub(crate) fn refine<F: Family>(
    fam: &F,
    start: &[f64],
    step0: f64,
    halvings: u32,
    objective: &(dyn Fn(&F::Dist) -> Option<f64> + Sync),
) -> (Vec<f64>, f64) {
    let blocks = fam.blocks();
    let mut rows: Vec<(usize, usize)> = Vec::new(); // (offset, cols)
    let mut at = 0;
    for &(r, c) in &blocks {
        for _ in 0..r {
            rows.push((at, c));
            at += c;
        }
    }
    let eval = |p: &[f64]| fam.build(p).ok().and_then(|d| objective(&d)).unwrap_or(f64::NEG_INFINITY);
    let mut cur = start.to_vec();
    let mut best = eval(&cur);
    let mut delta = step0;
    for _ in 0..=halvings {
        for _ in 0..MAX_PASSES {
            let mut improved = false;
            for &(off, c) in &rows {
                for i in 0..c {
                    for j in 0..c {
                        if i == j || cur[off + i] < delta - 1e-15 {
                            continue;
                        }
                        let mut cand = cur.clone();
                        cand[off + i] = (cand[off + i] - delta).max(0.0);
                        cand[off + j] += delta;
                        let v = eval(&cand);
                        if v > best + IMPROVE_EPS {
                            best = v;
                            cur = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        delta *= 0.5;
    }
    (cur, best)
}

/// Halvings needed so refinement reaches the requested lattice step and then
/// goes `cfg.refine_halvings` further.
pub(crate) fn refine_schedule(desc: &GridDescription, cfg: &GridConfig) -> (f64, u32) {
    let used = desc.lattice_k_used.max(1);
    let mut extra = 0;
    while (used << extra) < desc.lattice_k_requested {
        extra += 1;
    }
    (1.0 / used as f64, cfg.refine_halvings + extra)
}
