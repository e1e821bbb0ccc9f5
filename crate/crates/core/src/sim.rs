//! Finite-blocklength Monte Carlo of the random-binning scheme: typical
//! codebooks, partition encoders, decoders and exact-posterior equivocation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{GmacChannel, Receiver};
use crate::info::{entropy_of, FiniteDist, InfoError};
use crate::regions::{Kernel, RegionError};

/// Attempts allowed per typical sequence before giving up.
pub const REJECTION_BUDGET: usize = 1_000_000;
/// Largest number of `(a, b)` pairs enumerated per posterior.
pub const ENUMERATION_BUDGET: usize = 1 << 20;
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no {what} sequence within eps = {eps} found in {attempts} draws (n = {n})")]
    Sampling {
        what: &'static str,
        n: usize,
        eps: f64,
        attempts: usize,
    },
    #[error("enumeration of {size} candidates exceeds the budget of {budget}")]
    Enumeration { size: usize, budget: usize },
    #[error("invalid simulation parameters: {0}")]
    Parameter(String),
    #[error("index {what} = {value} out of range 0..{bound}")]
    Index { what: &'static str, value: usize, bound: usize },
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Default typicality slack: 0.1 up to n = 16, halved per doubling beyond.
pub fn default_eps(n: usize) -> f64 {
    if n <= 16 {
        0.1
    } else {
        0.1 * 16.0 / n as f64
    }
}

/// Input law `p(q) p(x1|q) p(x2|q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDist {
    pub q: Kernel,
    pub x1_given_q: Kernel,
    pub x2_given_q: Kernel,
}

impl InputDist {
    pub fn new(q: Kernel, x1_given_q: Kernel, x2_given_q: Kernel) -> Result<Self, SimError> {
        if q.rows != 1 || x1_given_q.rows != q.cols || x2_given_q.rows != q.cols {
            return Err(SimError::Parameter(format!(
                "input kernels {}x{}, {}x{}, {}x{} do not chain",
                q.rows, q.cols, x1_given_q.rows, x1_given_q.cols, x2_given_q.rows, x2_given_q.cols
            )));
        }
        Ok(Self { q, x1_given_q, x2_given_q })
    }

    /// Uniform binary `Q`, `X1 = Q xor Bern(alpha)`, `X2 = 1`.
    pub fn binary_superposition(alpha: f64) -> Result<Self, SimError> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(SimError::Parameter(format!("alpha = {alpha} outside [0, 1/2]")));
        }
        Self::new(
            Kernel::pmf(vec![0.5, 0.5])?,
            Kernel::new(2, 2, vec![1.0 - alpha, alpha, alpha, 1.0 - alpha])?,
            Kernel::new(2, 2, vec![0.0, 1.0, 0.0, 1.0])?,
        )
    }

    fn check(&self, ch: &GmacChannel) -> Result<(), SimError> {
        let a = ch.alphabets();
        if self.x1_given_q.cols != a.x1 || self.x2_given_q.cols != a.x2 {
            return Err(SimError::Parameter(format!(
                "inputs {}x{} vs channel {}x{}",
                self.x1_given_q.cols, self.x2_given_q.cols, a.x1, a.x2
            )));
        }
        Ok(())
    }

    /// Joint over `(Q, X1, X2, Y, Y1, Y2)`.
    pub fn joint(&self, ch: &GmacChannel) -> Result<FiniteDist, SimError> {
        self.check(ch)?;
        let a = ch.alphabets();
        let shape = vec![self.q.cols, a.x1, a.x2, a.y, a.y1, a.y2];
        Ok(FiniteDist::from_fn(shape, |i| {
            self.q.at(0, i[0]) * self.x1_given_q.at(i[0], i[1]) * self.x2_given_q.at(i[0], i[2]) * ch.prob(i[1], i[2], i[3], i[4], i[5])
        })?)
    }

    /// Information terms the scheme is built from.
    pub fn information(&self, ch: &GmacChannel) -> Result<SchemeInfo, SimError> {
        let j = self.joint(ch)?;
        let (q, x1, x2, y, y1, y2) = (0, 1, 2, 3, 4, 5);
        Ok(SchemeInfo {
            x1_y: j.cond_mutual_info(&[x1], &[y], &[x2, q])?,
            x2_y: j.cond_mutual_info(&[x2], &[y], &[x1, q])?,
            x1x2_y_given_q: j.cond_mutual_info(&[x1, x2], &[y], &[q])?,
            x1x2_y: j.mutual_info(&[x1, x2, q], &[y])?,
            leak1: j.cond_mutual_info(&[x1], &[y2], &[x2, q])?,
            leak2: j.cond_mutual_info(&[x2], &[y1], &[x1, q])?,
        })
    }
}

/// Exact information quantities for an input law (bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeInfo {
    /// `I(X1; Y | X2, Q)`
    pub x1_y: f64,
    /// `I(X2; Y | X1, Q)`
    pub x2_y: f64,
    /// `I(X1 X2; Y | Q)`
    pub x1x2_y_given_q: f64,
    /// `I(Q X1 X2; Y)`
    pub x1x2_y: f64,
    /// `I(X1; Y2 | X2, Q)`
    pub leak1: f64,
    /// `I(X2; Y1 | X1, Q)`
    pub leak2: f64,
}

impl SchemeInfo {
    /// Is `(R0, R'1, R'2)` inside the destination's decoding region?
    pub fn decodable(&self, r0: f64, r1p: f64, r2p: f64) -> bool {
        r1p <= self.x1_y && r2p <= self.x2_y && r1p + r2p <= self.x1x2_y_given_q && r0 + r1p + r2p <= self.x1x2_y
    }
}

fn type_counts(cells: impl Iterator<Item = usize>, size: usize) -> Vec<usize> {
    let mut counts = vec![0usize; size];
    cells.for_each(|c| counts[c] += 1);
    counts
}

/// Strong typicality: every cell's empirical frequency is within `eps` of its
/// mass, and zero-mass cells never occur.
pub fn is_typical(counts: &[usize], pmf: &[f64], n: usize, eps: f64) -> bool {
    counts.iter().zip(pmf).all(|(&c, &p)| {
        let f = c as f64 / n as f64;
        (f - p).abs() <= eps && (p > 0.0 || c == 0)
    })
}

fn draw(pmf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: last symbol with positive mass
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// An `eps`-typical sequence for `pmf`, by i.i.d. draws and rejection.
pub fn sample_typical(pmf: &[f64], n: usize, eps: f64, rng: &mut impl Rng) -> Result<Vec<u8>, SimError> {
    if n == 0 || !(eps > 0.0) {
        return Err(SimError::Parameter(format!("need n >= 1 and eps > 0, got n = {n}, eps = {eps}")));
    }
    for _ in 0..REJECTION_BUDGET {
        let seq: Vec<u8> = (0..n).map(|_| draw(pmf, rng) as u8).collect();
        if is_typical(&type_counts(seq.iter().map(|&s| s as usize), pmf.len()), pmf, n, eps) {
            return Ok(seq);
        }
    }
    Err(SimError::Sampling {
        what: "typical",
        n,
        eps,
        attempts: REJECTION_BUDGET,
    })
}

/// A sequence drawn from `kernel` given `base`, jointly typical with it.
fn sample_conditional(base: &[u8], base_pmf: &[f64], kernel: &Kernel, eps: f64, rng: &mut impl Rng) -> Result<Vec<u8>, SimError> {
    let n = base.len();
    let joint: Vec<f64> = (0..kernel.rows)
        .flat_map(|q| kernel.row(q).iter().map(move |&p| base_pmf[q] * p))
        .collect();
    for _ in 0..REJECTION_BUDGET {
        let seq: Vec<u8> = base.iter().map(|&q| draw(kernel.row(q as usize), rng) as u8).collect();
        let cells = base.iter().zip(&seq).map(|(&q, &x)| q as usize * kernel.cols + x as usize);
        if is_typical(&type_counts(cells, joint.len()), &joint, n, eps) {
            return Ok(seq);
        }
    }
    Err(SimError::Sampling {
        what: "conditionally typical",
        n,
        eps,
        attempts: REJECTION_BUDGET,
    })
}

/// Codebook sizes: `I` clouds, `A x B` user-1 words and `S x T` user-2 words per cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookSizes {
    pub i: usize,
    pub a: usize,
    pub b: usize,
    pub s: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub eps: f64,
    pub sizes: CodebookSizes,
    pub input: InputDist,
    pub info: SchemeInfo,
    /// Requested `(R0, R'1, R'2)`.
    pub requested: [f64; 3],
    pub clouds: Vec<Vec<u8>>,
    /// Indexed `(i * A + a) * B + b`.
    pub x1: Vec<Vec<u8>>,
    /// Indexed `(i * S + s) * T + t`.
    pub x2: Vec<Vec<u8>>,
}

fn rounded_size(n: usize, rate: f64) -> usize {
    ((n as f64 * rate.max(0.0)).exp2().round() as usize).max(1)
}

/// Splits `R'` into row and bin exponents: `(rows, bins)` with bins sized to the leakage.
fn split_sizes(n: usize, rate: f64, leak: f64) -> (usize, usize) {
    if rate <= leak {
        (1, rounded_size(n, rate))
    } else {
        (rounded_size(n, rate - leak), rounded_size(n, leak))
    }
}

impl Codebook {
    pub fn x1_word(&self, i: usize, a: usize, b: usize) -> &[u8] {
        &self.x1[(i * self.sizes.a + a) * self.sizes.b + b]
    }

    pub fn x2_word(&self, i: usize, s: usize, t: usize) -> &[u8] {
        &self.x2[(i * self.sizes.s + s) * self.sizes.t + t]
    }

    /// Realized `(R0, R'1, R'2)` after integer rounding.
    pub fn realized(&self) -> [f64; 3] {
        let n = self.n as f64;
        let s = self.sizes;
        [(s.i as f64).log2() / n, ((s.a * s.b) as f64).log2() / n, ((s.s * s.t) as f64).log2() / n]
    }

    /// Random codebook with typical words, reproducible from `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        ch: &GmacChannel,
        input: &InputDist,
        n: usize,
        r0: f64,
        r1p: f64,
        r2p: f64,
        eps: f64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if n == 0 || [r0, r1p, r2p].iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(SimError::Parameter(format!("n = {n}, rates ({r0}, {r1p}, {r2p})")));
        }
        let info = input.information(ch)?;
        let (a, b) = split_sizes(n, r1p, info.leak1);
        let (s, t) = split_sizes(n, r2p, info.leak2);
        let sizes = CodebookSizes { i: rounded_size(n, r0), a, b, s, t };
        let total = sizes.i * (a * b + s * t);
        if total > ENUMERATION_BUDGET {
            return Err(SimError::Enumeration { size: total, budget: ENUMERATION_BUDGET });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q_pmf = input.q.row(0);
        let mut clouds = Vec::with_capacity(sizes.i);
        let mut x1 = Vec::with_capacity(sizes.i * a * b);
        let mut x2 = Vec::with_capacity(sizes.i * s * t);
        for _ in 0..sizes.i {
            clouds.push(sample_typical(q_pmf, n, eps, &mut rng)?);
        }
        for cloud in &clouds {
            for _ in 0..a * b {
                x1.push(sample_conditional(cloud, q_pmf, &input.x1_given_q, eps, &mut rng)?);
            }
        }
        for cloud in &clouds {
            for _ in 0..s * t {
                x2.push(sample_conditional(cloud, q_pmf, &input.x2_given_q, eps, &mut rng)?);
            }
        }
        Ok(Self {
            n,
            eps,
            sizes,
            input: input.clone(),
            info,
            requested: [r0, r1p, r2p],
            clouds,
            x1,
            x2,
        })
    }

    /// Loads explicit words without typicality checks.
    pub fn from_words(
        ch: &GmacChannel,
        input: &InputDist,
        sizes: CodebookSizes,
        clouds: Vec<Vec<u8>>,
        x1: Vec<Vec<u8>>,
        x2: Vec<Vec<u8>>,
    ) -> Result<Self, SimError> {
        let n = clouds.first().map_or(0, Vec::len);
        let lens_ok = clouds.len() == sizes.i
            && x1.len() == sizes.i * sizes.a * sizes.b
            && x2.len() == sizes.i * sizes.s * sizes.t
            && clouds.iter().chain(&x1).chain(&x2).all(|w| w.len() == n);
        if n == 0 || !lens_ok {
            return Err(SimError::Parameter("word lists do not match the codebook sizes".into()));
        }
        let a = ch.alphabets();
        let in_range = |ws: &[Vec<u8>], k: usize| ws.iter().flatten().all(|&s| (s as usize) < k);
        if !in_range(&x1, a.x1) || !in_range(&x2, a.x2) || !in_range(&clouds, input.q.cols) {
            return Err(SimError::Parameter("codeword symbol outside its alphabet".into()));
        }
        let info = input.information(ch)?;
        let mut cb = Self {
            n,
            eps: default_eps(n),
            sizes,
            input: input.clone(),
            info,
            requested: [0.0; 3],
            clouds,
            x1,
            x2,
        };
        cb.requested = cb.realized();
        Ok(cb)
    }

    /// The two-word corner construction on the multiplier channel: one cloud,
    /// `x1 = W1`, `x2 = 1`, block length 1.
    pub fn multiplier_corner(ch: &GmacChannel) -> Result<Self, SimError> {
        let input = InputDist::new(
            Kernel::pmf(vec![1.0])?,
            Kernel::pmf(vec![0.5, 0.5])?,
            Kernel::pmf(vec![0.0, 1.0])?,
        )?;
        let sizes = CodebookSizes { i: 1, a: 2, b: 1, s: 1, t: 1 };
        Self::from_words(ch, &input, sizes, vec![vec![0]], vec![vec![0], vec![1]], vec![vec![1]])
    }
}

/// Assignment of bin indices to message cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMap {
    pub domain: usize,
    pub range: usize,
    pub assignment: Vec<usize>,
}

impl PartitionMap {
    /// Round robin: `index mod range`.
    pub fn round_robin(domain: usize, range: usize) -> Result<Self, SimError> {
        if range == 0 || range > domain {
            return Err(SimError::Parameter(format!("partition range {range} for domain {domain}")));
        }
        Ok(Self {
            domain,
            range,
            assignment: (0..domain).map(|b| b % range).collect(),
        })
    }

    pub fn cell(&self, j: usize) -> Vec<usize> {
        (0..self.domain).filter(|&b| self.assignment[b] == j).collect()
    }

    /// Largest over smallest preimage size.
    pub fn balance_ratio(&self) -> f64 {
        let sizes: Vec<usize> = (0..self.range).map(|j| self.cell(j).len()).collect();
        let max = *sizes.iter().max().unwrap_or(&0) as f64;
        let min = *sizes.iter().min().unwrap_or(&0) as f64;
        max / min
    }
}

pub fn make_partitions(b: usize, j: usize, t: usize, k: usize) -> Result<(PartitionMap, PartitionMap), SimError> {
    Ok((PartitionMap::round_robin(b, j)?, PartitionMap::round_robin(t, k)?))
}

/// How a user's confidential message is mapped onto codebook indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Message `(a, j)`, bin index drawn uniformly from cell `j`.
    Binning,
    /// Message rate below `R' - I`: message picks the row, bin index uniform over all bins.
    RowOnly,
    /// `R'` at or below the leakage: a single row; no equivocation guarantee.
    BelowLeakage,
}

/// Message layout for one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessagePlan {
    pub regime: Regime,
    /// Rows addressed by the message.
    pub rows: usize,
    pub partition: PartitionMap,
}

impl MessagePlan {
    /// Chooses the regime from the realized leakage and the requested message rate `r <= R'`.
    pub fn choose(n: usize, rows: usize, bins: usize, rate_prime: f64, leak: f64, r: f64) -> Result<Self, SimError> {
        if !(r >= 0.0) || r > rate_prime + 1e-12 {
            return Err(SimError::Parameter(format!("message rate {r} must lie in [0, {rate_prime}]")));
        }
        let (regime, rows_used, cells) = if rate_prime <= leak {
            (Regime::BelowLeakage, 1, rounded_size(n, r).min(bins))
        } else if r < rate_prime - leak - 1e-12 {
            (Regime::RowOnly, rounded_size(n, r).min(rows), 1)
        } else {
            (Regime::Binning, rows, rounded_size(n, r - (rate_prime - leak)).min(bins))
        };
        Ok(Self {
            regime,
            rows: rows_used,
            partition: PartitionMap::round_robin(bins, cells)?,
        })
    }

    pub fn messages(&self) -> usize {
        self.rows * self.partition.range
    }

    /// Realized message rate.
    pub fn rate(&self, n: usize) -> f64 {
        (self.messages() as f64).log2() / n as f64
    }
}

/// Both users' message plans for a codebook.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub user1: MessagePlan,
    pub user2: MessagePlan,
}

impl Encoder {
    pub fn new(cb: &Codebook, r1: f64, r2: f64) -> Result<Self, SimError> {
        let [_, r1p, r2p] = cb.requested;
        let s = cb.sizes;
        Ok(Self {
            user1: MessagePlan::choose(cb.n, s.a, s.b, r1p, cb.info.leak1, r1)?,
            user2: MessagePlan::choose(cb.n, s.s, s.t, r2p, cb.info.leak2, r2)?,
        })
    }

    /// Index tuple `(i, a, b, s, t)` for messages `w0`, `w1 = (a, j)`, `w2 = (s, k)`.
    pub fn encode(
        &self,
        cb: &Codebook,
        w0: usize,
        w1: (usize, usize),
        w2: (usize, usize),
        rng: &mut impl Rng,
    ) -> Result<[usize; 5], SimError> {
        let check = |what, value, bound| {
            if value < bound {
                Ok(())
            } else {
                Err(SimError::Index { what, value, bound })
            }
        };
        check("w0", w0, cb.sizes.i)?;
        check("a", w1.0, self.user1.rows)?;
        check("j", w1.1, self.user1.partition.range)?;
        check("s", w2.0, self.user2.rows)?;
        check("k", w2.1, self.user2.partition.range)?;
        let pick = |cell: Vec<usize>, rng: &mut dyn rand::RngCore| cell[rng.gen_range(0..cell.len())];
        let b = pick(self.user1.partition.cell(w1.1), rng);
        let t = pick(self.user2.partition.cell(w2.1), rng);
        Ok([w0, w1.0, b, w2.0, t])
    }
}

/// One channel use per symbol, sampled from the joint transition law.
pub fn transmit(ch: &GmacChannel, x1: &[u8], x2: &[u8], rng: &mut impl Rng) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let a = ch.alphabets();
    let n = x1.len();
    let (mut y, mut y1, mut y2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (&u, &v) in x1.iter().zip(x2) {
        let k = draw(ch.slice(u as usize, v as usize), rng);
        y.push((k / (a.y1 * a.y2)) as u8);
        y1.push(((k / a.y2) % a.y1) as u8);
        y2.push((k % a.y2) as u8);
    }
    (y, y1, y2)
}

/// `log2 p(out | x1, x2)` table for one receiver.
#[derive(Debug, Clone)]
struct LogLaw {
    x2: usize,
    outputs: usize,
    table: Vec<f64>,
}

impl LogLaw {
    fn new(ch: &GmacChannel, r: Receiver) -> Self {
        let m = ch.marginal(r);
        let mut table = Vec::with_capacity(m.x1 * m.x2 * m.outputs);
        for x1 in 0..m.x1 {
            for x2 in 0..m.x2 {
                for o in 0..m.outputs {
                    table.push(m.prob(x1, x2, o).log2());
                }
            }
        }
        Self { x2: m.x2, outputs: m.outputs, table }
    }

    fn word(&self, x1: &[u8], x2: &[u8], out: &[u8]) -> f64 {
        x1.iter()
            .zip(x2)
            .zip(out)
            .map(|((&a, &b), &o)| self.table[(a as usize * self.x2 + b as usize) * self.outputs + o as usize])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DecoderMode {
    /// Maximum likelihood, lowest index on ties.
    Map,
    /// Unique jointly typical tuple.
    Typicality { eps: f64 },
}

/// Channel-dependent decoding tables shared across trials.
pub struct Decoders {
    dest: LogLaw,
    user1: LogLaw,
    user2: LogLaw,
    /// `p(q, x1, x2, y)` flattened.
    typical_pmf: Vec<f64>,
    dims: [usize; 4],
}

impl Decoders {
    pub fn new(ch: &GmacChannel, cb: &Codebook) -> Result<Self, SimError> {
        let j = cb.input.joint(ch)?;
        let typical_pmf = j.marginal_mass(&[0, 1, 2, 3])?;
        let a = ch.alphabets();
        Ok(Self {
            dest: LogLaw::new(ch, Receiver::Destination),
            user1: LogLaw::new(ch, Receiver::User1),
            user2: LogLaw::new(ch, Receiver::User2),
            typical_pmf,
            dims: [cb.input.q.cols, a.x1, a.x2, a.y],
        })
    }

    fn jointly_typical(&self, q: &[u8], x1: &[u8], x2: &[u8], y: &[u8], eps: f64) -> bool {
        let [_, d1, d2, dy] = self.dims;
        let cells = (0..q.len()).map(|k| ((q[k] as usize * d1 + x1[k] as usize) * d2 + x2[k] as usize) * dy + y[k] as usize);
        is_typical(&type_counts(cells, self.typical_pmf.len()), &self.typical_pmf, q.len(), eps)
    }

    /// Destination estimate of `(i, a, b, s, t)`; `None` is a typicality failure.
    pub fn destination(&self, cb: &Codebook, y: &[u8], mode: DecoderMode) -> Option<[usize; 5]> {
        let s = cb.sizes;
        let mut best: Option<([usize; 5], f64)> = None;
        let mut found = 0usize;
        for i in 0..s.i {
            for a in 0..s.a {
                for b in 0..s.b {
                    let w1 = cb.x1_word(i, a, b);
                    for ss in 0..s.s {
                        for t in 0..s.t {
                            let w2 = cb.x2_word(i, ss, t);
                            let idx = [i, a, b, ss, t];
                            match mode {
                                DecoderMode::Map => {
                                    let ll = self.dest.word(w1, w2, y);
                                    if best.map_or(true, |(_, v)| ll > v) {
                                        best = Some((idx, ll));
                                    }
                                }
                                DecoderMode::Typicality { eps } => {
                                    if self.jointly_typical(&cb.clouds[i], w1, w2, y, eps) {
                                        found += 1;
                                        if found > 1 {
                                            return None;
                                        }
                                        best = Some((idx, 0.0));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        best.map(|(idx, _)| idx)
    }

    /// User 2's estimate of `b` knowing `(i, a, s, t)` and its own output.
    pub fn eavesdropper1(&self, cb: &Codebook, y2: &[u8], known: [usize; 4], mode: DecoderMode) -> Option<usize> {
        let [i, a, s, t] = known;
        let w2 = cb.x2_word(i, s, t);
        let cands = (0..cb.sizes.b).map(|b| (b, cb.x1_word(i, a, b)));
        self.within_row(&self.user2, cands, |w| (w, w2), y2, mode)
    }

    /// User 1's estimate of `t` knowing `(i, s, a, b)` and its own output.
    pub fn eavesdropper2(&self, cb: &Codebook, y1: &[u8], known: [usize; 4], mode: DecoderMode) -> Option<usize> {
        let [i, s, a, b] = known;
        let w1 = cb.x1_word(i, a, b);
        let cands = (0..cb.sizes.t).map(|t| (t, cb.x2_word(i, s, t)));
        self.within_row(&self.user1, cands, |w| (w1, w), y1, mode)
    }

    fn within_row<'a>(
        &self,
        law: &LogLaw,
        cands: impl Iterator<Item = (usize, &'a [u8])>,
        pair: impl Fn(&'a [u8]) -> (&'a [u8], &'a [u8]),
        out: &[u8],
        mode: DecoderMode,
    ) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        let mut found = 0;
        for (k, w) in cands {
            let (u, v) = pair(w);
            match mode {
                DecoderMode::Map => {
                    let ll = law.word(u, v, out);
                    if best.map_or(true, |(_, b)| ll > b) {
                        best = Some((k, ll));
                    }
                }
                DecoderMode::Typicality { eps } => {
                    // Eavesdropper typicality against its own marginal law.
                    let n = out.len();
                    let pmf: Vec<f64> = law.table.iter().map(|l| l.exp2()).collect();
                    let cells = (0..n).map(|i| (u[i] as usize * law.x2 + v[i] as usize) * law.outputs + out[i] as usize);
                    let counts = type_counts(cells, pmf.len());
                    let rows = pmf.len() / law.outputs;
                    let input_counts: Vec<usize> = (0..rows).map(|r| counts[r * law.outputs..(r + 1) * law.outputs].iter().sum()).collect();
                    // conditional typicality: each input cell's output split close to the law
                    let ok = (0..rows).all(|r| {
                        let m = input_counts[r];
                        m == 0
                            || (0..law.outputs).all(|o| {
                                let p = pmf[r * law.outputs + o];
                                let f = counts[r * law.outputs + o] as f64 / m as f64;
                                (f - p).abs() * m as f64 <= eps * n as f64 && (p > 0.0 || counts[r * law.outputs + o] == 0)
                            })
                    });
                    if ok {
                        found += 1;
                        if found > 1 {
                            return None;
                        }
                        best = Some((k, 0.0));
                    }
                }
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Posterior entropy (bits) of a message given per-candidate log-likelihood
/// groups; each message's likelihood averages its candidates uniformly.
/// Also returns the largest deviation of the posterior from uniform.
fn posterior_entropy(groups: &[Vec<f64>]) -> (f64, f64) {
    let logs: Vec<f64> = groups
        .iter()
        .map(|g| {
            let m = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            let s: f64 = g.iter().map(|l| (l - m).exp2()).sum();
            m + (s / g.len() as f64).log2()
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - m).exp2()).collect();
    let total: f64 = weights.iter().sum();
    let post: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let uniform = 1.0 / post.len() as f64;
    let dev = post.iter().map(|p| (p - uniform).abs()).fold(0.0, f64::max);
    (entropy_of(&post), dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
}

impl Estimate {
    fn from_samples(sum: f64, sum_sq: f64, trials: usize) -> Self {
        let t = trials as f64;
        let mean = sum / t;
        let var = (sum_sq / t - mean * mean).max(0.0);
        Self {
            mean,
            half_width: Z95 * (var / t).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    pub decoder: DecoderMode,
    pub sizes: CodebookSizes,
    /// Realized `(R0, R'1, R'2)`.
    pub realized_rates: [f64; 3],
    /// Realized `(R1, R2)`.
    pub message_rates: [f64; 2],
    pub regime1: Regime,
    pub regime2: Regime,
    /// Destination error frequency over the full index tuple.
    pub lambda: Estimate,
    /// User 2 failing to recover `b`; absent below the leakage.
    pub lambda1: Option<Estimate>,
    /// User 1 failing to recover `t`; absent below the leakage.
    pub lambda2: Option<Estimate>,
    /// `H(W1 | Y2^n, X2^n, W0, W2) / n`.
    pub equivocation1: Estimate,
    /// `H(W2 | Y1^n, X1^n, W0, W1) / n`.
    pub equivocation2: Estimate,
    /// Largest distance of any W1 posterior from uniform.
    pub max_posterior_deviation1: f64,
    /// `R'1 - I(X1; Y2 | X2, Q)` at realized rates.
    pub equivocation1_target: f64,
}

impl SimStats {
    /// Equivocation within its ceiling and frequencies within [0, 1].
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut freqs = vec![self.lambda.mean];
        freqs.extend(self.lambda1.map(|e| e.mean));
        freqs.extend(self.lambda2.map(|e| e.mean));
        if freqs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err("error frequency outside [0, 1]".into());
        }
        for (e, cap, who) in [
            (self.equivocation1.mean, self.message_rates[0], "W1"),
            (self.equivocation2.mean, self.message_rates[1], "W2"),
        ] {
            if e < -1e-9 || e > cap + 1e-9 {
                return Err(format!("equivocation of {who} = {e} outside [0, {cap}]"));
            }
        }
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct TrialOutcome {
    err: f64,
    err1: f64,
    err2: f64,
    eq1: f64,
    eq2: f64,
    dev1: f64,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

/// Runs `trials` independent transmissions, estimating error frequencies and
/// computing each trial's exact message posteriors at both eavesdroppers.
pub fn measure_equivocation(
    cb: &Codebook,
    enc: &Encoder,
    ch: &GmacChannel,
    trials: usize,
    seed: u64,
    mode: DecoderMode,
) -> Result<SimStats, SimError> {
    if trials == 0 {
        return Err(SimError::Parameter("trials must be positive".into()));
    }
    let pairs1 = enc.user1.messages() * enc.user1.partition.domain;
    let pairs2 = enc.user2.messages() * enc.user2.partition.domain;
    let largest = pairs1.max(pairs2);
    if largest > ENUMERATION_BUDGET {
        return Err(SimError::Enumeration { size: largest, budget: ENUMERATION_BUDGET });
    }
    let dec = Decoders::new(ch, cb)?;
    let cells1: Vec<Vec<usize>> = (0..enc.user1.partition.range).map(|j| enc.user1.partition.cell(j)).collect();
    let cells2: Vec<Vec<usize>> = (0..enc.user2.partition.range).map(|k| enc.user2.partition.cell(k)).collect();
    let outcomes: Vec<Result<TrialOutcome, SimError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let w0 = rng.gen_range(0..cb.sizes.i);
            let w1 = (rng.gen_range(0..enc.user1.rows), rng.gen_range(0..enc.user1.partition.range));
            let w2 = (rng.gen_range(0..enc.user2.rows), rng.gen_range(0..enc.user2.partition.range));
            let idx = enc.encode(cb, w0, w1, w2, &mut rng)?;
            let [i, a, b, s, t] = idx;
            let (x1, x2) = (cb.x1_word(i, a, b), cb.x2_word(i, s, t));
            let (y, y1, y2) = transmit(ch, x1, x2, &mut rng);
            let mut out = TrialOutcome::default();
            out.err = f64::from(dec.destination(cb, &y, mode) != Some(idx));
            if enc.user1.regime != Regime::BelowLeakage {
                out.err1 = f64::from(dec.eavesdropper1(cb, &y2, [i, a, s, t], mode) != Some(b));
            }
            if enc.user2.regime != Regime::BelowLeakage {
                out.err2 = f64::from(dec.eavesdropper2(cb, &y1, [i, s, a, b], mode) != Some(t));
            }
            // W1 posterior at user 2: messages (a', j'), candidates b in cell j'.
            let groups1: Vec<Vec<f64>> = (0..enc.user1.rows)
                .flat_map(|a2| cells1.iter().map(move |cell| (a2, cell)))
                .map(|(a2, cell)| cell.iter().map(|&b2| dec.user2.word(cb.x1_word(i, a2, b2), x2, &y2)).collect())
                .collect();
            let (h1, dev1) = posterior_entropy(&groups1);
            let groups2: Vec<Vec<f64>> = (0..enc.user2.rows)
                .flat_map(|s2| cells2.iter().map(move |cell| (s2, cell)))
                .map(|(s2, cell)| cell.iter().map(|&t2| dec.user1.word(x1, cb.x2_word(i, s2, t2), &y1)).collect())
                .collect();
            let (h2, _) = posterior_entropy(&groups2);
            out.eq1 = h1 / cb.n as f64;
            out.eq2 = h2 / cb.n as f64;
            out.dev1 = dev1;
            Ok(out)
        })
        .collect();
    // Sequential reduction keeps the sums independent of scheduling.
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    let mut dev1 = 0.0f64;
    for o in outcomes {
        let o = o?;
        for (k, v) in [o.err, o.err1, o.err2, o.eq1, o.eq2].into_iter().enumerate() {
            sums[k] += v;
            sq[k] += v * v;
        }
        dev1 = dev1.max(o.dev1);
    }
    let est = |k: usize| Estimate::from_samples(sums[k], sq[k], trials);
    let realized = cb.realized();
    let leak_skip = |p: &MessagePlan, k| (p.regime != Regime::BelowLeakage).then(|| est(k));
    Ok(SimStats {
        seed,
        n: cb.n,
        trials,
        decoder: mode,
        sizes: cb.sizes,
        realized_rates: realized,
        message_rates: [enc.user1.rate(cb.n), enc.user2.rate(cb.n)],
        regime1: enc.user1.regime,
        regime2: enc.user2.regime,
        lambda: est(0),
        lambda1: leak_skip(&enc.user1, 1),
        lambda2: leak_skip(&enc.user2, 2),
        equivocation1: est(3),
        equivocation2: est(4),
        max_posterior_deviation1: dev1,
        equivocation1_target: (realized[1] - cb.info.leak1).max(0.0),
    })
}

/// Everything needed for one seeded simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub r0: f64,
    pub r1_prime: f64,
    pub r1: f64,
    pub r2_prime: f64,
    pub r2: f64,
    pub eps: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub decoder: DecoderMode,
}

/// Builds the codebook (seed stream 0) and measures it (streams 1..).
pub fn simulate(ch: &GmacChannel, input: &InputDist, cfg: &SimConfig) -> Result<SimStats, SimError> {
    let eps = cfg.eps.unwrap_or_else(|| default_eps(cfg.n));
    let cb = Codebook::build(ch, input, cfg.n, cfg.r0, cfg.r1_prime, cfg.r2_prime, eps, cfg.seed)?;
    let enc = Encoder::new(&cb, cfg.r1, cfg.r2)?;
    measure_equivocation(&cb, &enc, ch, cfg.trials, cfg.seed, cfg.decoder)
}
