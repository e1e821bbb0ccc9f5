//! Discrete memoryless GMACs: validation, receiver marginals, degradedness
//! checks and the built-in example channels.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normalization tolerance applied when loading a channel document.
pub const LOAD_TOL: f64 = 1e-8;
/// Default tolerance for both degradedness checks.
pub const DEGRADED_TOL: f64 = 1e-9;

const PROJECTION_ITERS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("malformed channel document: {0}")]
    Malformed(String),
    #[error("alphabet sizes must be positive, got {0:?}")]
    EmptyAlphabet(Alphabets),
    #[error("transition dimension mismatch at {at}: expected {expected}, found {found}")]
    DimensionMismatch {
        at: String,
        expected: usize,
        found: usize,
    },
    #[error("negative or non-finite transition entry {value} at {at}")]
    BadEntry { at: String, value: f64 },
    #[error("slice (x1={x1}, x2={x2}) sums to {sum}")]
    NotStochastic { x1: usize, x2: usize, sum: f64 },
    #[error("parameter {name} = {value} out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("unknown builtin channel {0:?}")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    pub x1: usize,
    pub x2: usize,
    pub y: usize,
    pub y1: usize,
    pub y2: usize,
}

impl Alphabets {
    fn outputs(&self) -> usize {
        self.y * self.y1 * self.y2
    }
}

/// On-disk channel document: `transition[x1][x2][y][y1][y2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub alphabets: Alphabets,
    pub transition: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
}

/// Transition law `p(y, y1, y2 | x1, x2)` of a discrete memoryless GMAC.
#[derive(Debug, Clone, PartialEq)]
pub struct GmacChannel {
    alphabets: Alphabets,
    // Row-major over [x1][x2][y][y1][y2].
    transition: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Destination,
    User1,
    User2,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Receiver::Destination => "destination",
            Receiver::User1 => "user1",
            Receiver::User2 => "user2",
        };
        f.write_str(s)
    }
}

/// `p(output | x1, x2)` for a single receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalChannel {
    pub receiver: Receiver,
    pub x1: usize,
    pub x2: usize,
    pub outputs: usize,
    // Row-major over [x1][x2][out].
    prob: Vec<f64>,
}

impl MarginalChannel {
    pub fn prob(&self, x1: usize, x2: usize, out: usize) -> f64 {
        self.prob[(x1 * self.x2 + x2) * self.outputs + out]
    }

    /// The output distribution for one input pair.
    pub fn column(&self, x1: usize, x2: usize) -> &[f64] {
        let start = (x1 * self.x2 + x2) * self.outputs;
        &self.prob[start..start + self.outputs]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradednessReport {
    pub physically_degraded: bool,
    pub stochastically_degraded: bool,
    /// `kernel[x2][y][y2] = p(y2 | y, x2)` when stochastically degraded.
    pub degrading_kernel: Option<Vec<Vec<Vec<f64>>>>,
    /// Max over `(x2, x1, y2)` of the violation of the degradation identity.
    pub residual: f64,
}

/// Named example channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `Y = X1 X2`, `Y2 = 1{X1 <= X2}`, trivial `Y1`.
    MultiplierBias,
    /// `Y = X1 X2`, `Y2 = Y xor Z2` with `Pr(Z2 = 1) = p`, trivial `Y1`.
    DegradedBinary { p: f64 },
}

impl GmacChannel {
    /// Builds a channel from a dense `[x1][x2][y][y1][y2]` tensor.
    pub fn new(alphabets: Alphabets, transition: Vec<f64>) -> Result<Self, ChannelError> {
        Self::with_tolerance(alphabets, transition, LOAD_TOL)
    }

    fn with_tolerance(alphabets: Alphabets, mut transition: Vec<f64>, tol: f64) -> Result<Self, ChannelError> {
        let a = alphabets;
        if [a.x1, a.x2, a.y, a.y1, a.y2].contains(&0) {
            return Err(ChannelError::EmptyAlphabet(a));
        }
        let expected = a.x1 * a.x2 * a.outputs();
        if transition.len() != expected {
            return Err(ChannelError::DimensionMismatch {
                at: "transition".into(),
                expected,
                found: transition.len(),
            });
        }
        let out = a.outputs();
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                let start = (x1 * a.x2 + x2) * out;
                let slice = &mut transition[start..start + out];
                if let Some(&bad) = slice.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(ChannelError::BadEntry {
                        at: format!("x1={x1}, x2={x2}"),
                        value: bad,
                    });
                }
                let sum: f64 = slice.iter().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(ChannelError::NotStochastic { x1, x2, sum });
                }
                // Renormalize away the admitted slack so downstream sums are exact.
                slice.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self {
            alphabets,
            transition,
        })
    }

    pub fn from_spec(spec: &ChannelSpec) -> Result<Self, ChannelError> {
        let a = spec.alphabets;
        let mut flat = Vec::with_capacity(a.x1 * a.x2 * a.outputs());
        check_len("transition", a.x1, spec.transition.len())?;
        for (i1, by_x2) in spec.transition.iter().enumerate() {
            check_len(&format!("[{i1}]"), a.x2, by_x2.len())?;
            for (i2, by_y) in by_x2.iter().enumerate() {
                check_len(&format!("[{i1}][{i2}]"), a.y, by_y.len())?;
                for (iy, by_y1) in by_y.iter().enumerate() {
                    check_len(&format!("[{i1}][{i2}][{iy}]"), a.y1, by_y1.len())?;
                    for (iy1, by_y2) in by_y1.iter().enumerate() {
                        check_len(&format!("[{i1}][{i2}][{iy}][{iy1}]"), a.y2, by_y2.len())?;
                        flat.extend_from_slice(by_y2);
                    }
                }
            }
        }
        Self::new(a, flat)
    }

    pub fn to_spec(&self) -> ChannelSpec {
        let a = self.alphabets;
        let transition = (0..a.x1)
            .map(|x1| {
                (0..a.x2)
                    .map(|x2| {
                        (0..a.y)
                            .map(|y| {
                                (0..a.y1)
                                    .map(|y1| (0..a.y2).map(|y2| self.prob(x1, x2, y, y1, y2)).collect())
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ChannelSpec {
            alphabets: a,
            transition,
        }
    }

    /// Parses a JSON channel document.
    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        let spec: ChannelSpec = serde_json::from_str(text).map_err(|e| ChannelError::Malformed(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChannelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn builtin(which: Builtin) -> Result<Self, ChannelError> {
        match which {
            Builtin::MultiplierBias => {
                let a = Alphabets {
                    x1: 2,
                    x2: 2,
                    y: 2,
                    y1: 1,
                    y2: 2,
                };
                Self::from_deterministic(a, |x1, x2| (x1 * x2, 0, usize::from(x1 <= x2)))
            }
            Builtin::DegradedBinary { p } => {
                if !(0.0..=0.5).contains(&p) {
                    return Err(ChannelError::Parameter { name: "p", value: p });
                }
                let a = Alphabets {
                    x1: 2,
                    x2: 2,
                    y: 2,
                    y1: 1,
                    y2: 2,
                };
                let mut t = vec![0.0; 16];
                for x1 in 0..2 {
                    for x2 in 0..2 {
                        let y = x1 * x2;
                        for y2 in 0..2 {
                            t[((x1 * 2 + x2) * 2 + y) * 2 + y2] = if y2 == y { 1.0 - p } else { p };
                        }
                    }
                }
                Self::new(a, t)
            }
        }
    }

    /// Channel whose outputs are a deterministic function of the inputs.
    pub fn from_deterministic(
        alphabets: Alphabets,
        f: impl Fn(usize, usize) -> (usize, usize, usize),
    ) -> Result<Self, ChannelError> {
        let a = alphabets;
        let mut t = vec![0.0; a.x1 * a.x2 * a.outputs()];
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                let (y, y1, y2) = f(x1, x2);
                if y >= a.y || y1 >= a.y1 || y2 >= a.y2 {
                    return Err(ChannelError::Malformed(format!("output out of range at ({x1}, {x2})")));
                }
                t[(((x1 * a.x2 + x2) * a.y + y) * a.y1 + y1) * a.y2 + y2] = 1.0;
            }
        }
        Self::new(a, t)
    }

    /// Channel with `y`, `y1`, `y2` conditionally independent given the inputs.
    pub fn from_marginals(
        alphabets: Alphabets,
        dest: impl Fn(usize, usize, usize) -> f64,
        user1: impl Fn(usize, usize, usize) -> f64,
        user2: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self, ChannelError> {
        let a = alphabets;
        let mut t = Vec::with_capacity(a.x1 * a.x2 * a.outputs());
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                for y in 0..a.y {
                    for y1 in 0..a.y1 {
                        for y2 in 0..a.y2 {
                            t.push(dest(x1, x2, y) * user1(x1, x2, y1) * user2(x1, x2, y2));
                        }
                    }
                }
            }
        }
        Self::new(a, t)
    }

    /// A random channel: each input slice is an independent draw from a
    /// symmetric Dirichlet-like law skewed toward sparse rows.
    pub fn random<R: Rng + ?Sized>(alphabets: Alphabets, rng: &mut R) -> Self {
        let a = alphabets;
        let out = a.outputs();
        let mut t = Vec::with_capacity(a.x1 * a.x2 * out);
        for _ in 0..a.x1 * a.x2 {
            let raw: Vec<f64> = (0..out).map(|_| -rng.gen::<f64>().max(1e-300).ln()).map(|e| e * e).collect();
            let total: f64 = raw.iter().sum();
            t.extend(raw.into_iter().map(|v| v / total));
        }
        Self::new(a, t).expect("random slices are normalized")
    }

    pub fn alphabets(&self) -> Alphabets {
        self.alphabets
    }

    pub fn prob(&self, x1: usize, x2: usize, y: usize, y1: usize, y2: usize) -> f64 {
        let a = &self.alphabets;
        self.transition[(((x1 * a.x2 + x2) * a.y + y) * a.y1 + y1) * a.y2 + y2]
    }

    /// All `(y, y1, y2)` probabilities for one input pair, row-major.
    pub fn slice(&self, x1: usize, x2: usize) -> &[f64] {
        let out = self.alphabets.outputs();
        let start = (x1 * self.alphabets.x2 + x2) * out;
        &self.transition[start..start + out]
    }

    pub fn marginal(&self, receiver: Receiver) -> MarginalChannel {
        let a = self.alphabets;
        let outputs = match receiver {
            Receiver::Destination => a.y,
            Receiver::User1 => a.y1,
            Receiver::User2 => a.y2,
        };
        let mut prob = vec![0.0; a.x1 * a.x2 * outputs];
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                let base = (x1 * a.x2 + x2) * outputs;
                for y in 0..a.y {
                    for y1 in 0..a.y1 {
                        for y2 in 0..a.y2 {
                            let o = match receiver {
                                Receiver::Destination => y,
                                Receiver::User1 => y1,
                                Receiver::User2 => y2,
                            };
                            prob[base + o] += self.prob(x1, x2, y, y1, y2);
                        }
                    }
                }
            }
        }
        MarginalChannel {
            receiver,
            x1: a.x1,
            x2: a.x2,
            outputs,
            prob,
        }
    }

    /// `p(y, y2 | x1, x2)` with `y1` summed out, row-major `[x1][x2][y][y2]`.
    fn dest_eaves_joint(&self) -> Vec<f64> {
        let a = self.alphabets;
        let mut joint = vec![0.0; a.x1 * a.x2 * a.y * a.y2];
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                for y in 0..a.y {
                    for y1 in 0..a.y1 {
                        for y2 in 0..a.y2 {
                            joint[((x1 * a.x2 + x2) * a.y + y) * a.y2 + y2] += self.prob(x1, x2, y, y1, y2);
                        }
                    }
                }
            }
        }
        joint
    }

    /// True iff `p(y2 | y, x1, x2)` does not depend on `x1` wherever
    /// `p(y | x1, x2) > tol`.
    pub fn is_physically_degraded(&self, tol: f64) -> bool {
        let a = self.alphabets;
        let joint = self.dest_eaves_joint();
        let dest = self.marginal(Receiver::Destination);
        for x2 in 0..a.x2 {
            for y in 0..a.y {
                let mut reference: Option<Vec<f64>> = None;
                for x1 in 0..a.x1 {
                    let py = dest.prob(x1, x2, y);
                    if py <= tol {
                        continue;
                    }
                    let cond: Vec<f64> = (0..a.y2)
                        .map(|y2| joint[((x1 * a.x2 + x2) * a.y + y) * a.y2 + y2] / py)
                        .collect();
                    match &reference {
                        None => reference = Some(cond),
                        Some(r) => {
                            if r.iter().zip(&cond).any(|(u, v)| (u - v).abs() > tol) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    /// Searches, per `x2`, for a row-stochastic kernel `K[y][y2]` with
    /// `sum_y p(y|x1,x2) K[y][y2] = p(y2|x1,x2)` for every `x1`.
    ///
    /// Projected accelerated gradient on the least-squares objective, started
    /// from the conditional `p(y2 | y, x2)` implied by the joint law (an exact
    /// witness when the channel is physically degraded).
    pub fn find_stochastic_degradation(&self, tol: f64) -> DegradednessReport {
        let a = self.alphabets;
        let dest = self.marginal(Receiver::Destination);
        let eaves = self.marginal(Receiver::User2);
        let joint = self.dest_eaves_joint();
        let mut kernels = Vec::with_capacity(a.x2);
        let mut residual = 0.0_f64;

        for x2 in 0..a.x2 {
            // P[x1][y], target T[x1][y2]
            let pm: Vec<Vec<f64>> = (0..a.x1).map(|x1| dest.column(x1, x2).to_vec()).collect();
            let target: Vec<Vec<f64>> = (0..a.x1).map(|x1| eaves.column(x1, x2).to_vec()).collect();

            let mut kernel: Vec<Vec<f64>> = (0..a.y)
                .map(|y| {
                    let mut row: Vec<f64> = (0..a.y2)
                        .map(|y2| (0..a.x1).map(|x1| joint[((x1 * a.x2 + x2) * a.y + y) * a.y2 + y2]).sum())
                        .collect();
                    let mass: f64 = row.iter().sum();
                    if mass > 0.0 {
                        row.iter_mut().for_each(|v| *v /= mass);
                    } else {
                        row.iter_mut().for_each(|v| *v = 1.0 / a.y2 as f64);
                    }
                    row
                })
                .collect();

            let mut best = kernel.clone();
            let mut best_res = max_violation(&pm, &kernel, &target);
            if best_res > tol * 1e-3 {
                // Lipschitz constant of the gradient: largest eigenvalue of P^T P,
                // bounded by its Frobenius norm.
                let lip: f64 = {
                    let mut ptp = vec![vec![0.0; a.y]; a.y];
                    for row in &pm {
                        for i in 0..a.y {
                            for j in 0..a.y {
                                ptp[i][j] += row[i] * row[j];
                            }
                        }
                    }
                    ptp.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(1e-12)
                };
                let step = 1.0 / lip;
                let mut momentum = kernel.clone();
                let mut t_prev = 1.0_f64;
                for _ in 0..PROJECTION_ITERS {
                    // grad = P^T (P M - T)
                    let mut resid = vec![vec![0.0; a.y2]; a.x1];
                    for x1 in 0..a.x1 {
                        for y2 in 0..a.y2 {
                            let v: f64 = (0..a.y).map(|y| pm[x1][y] * momentum[y][y2]).sum();
                            resid[x1][y2] = v - target[x1][y2];
                        }
                    }
                    let mut next = momentum.clone();
                    for y in 0..a.y {
                        for y2 in 0..a.y2 {
                            let g: f64 = (0..a.x1).map(|x1| pm[x1][y] * resid[x1][y2]).sum();
                            next[y][y2] -= step * g;
                        }
                        project_simplex(&mut next[y]);
                    }
                    let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt());
                    let beta = (t_prev - 1.0) / t_next;
                    for y in 0..a.y {
                        for y2 in 0..a.y2 {
                            momentum[y][y2] = next[y][y2] + beta * (next[y][y2] - kernel[y][y2]);
                        }
                        project_simplex(&mut momentum[y]);
                    }
                    kernel = next;
                    t_prev = t_next;
                    let r = max_violation(&pm, &kernel, &target);
                    if r < best_res {
                        best_res = r;
                        best = kernel.clone();
                    }
                    if best_res <= tol * 1e-3 {
                        break;
                    }
                }
            }
            residual = residual.max(best_res);
            kernels.push(best);
        }

        let stochastically_degraded = residual <= tol;
        let physically_degraded = self.is_physically_degraded(tol);
        DegradednessReport {
            physically_degraded,
            stochastically_degraded: stochastically_degraded || physically_degraded,
            degrading_kernel: (stochastically_degraded || physically_degraded).then_some(kernels),
            residual,
        }
    }
}

fn check_len(at: &str, expected: usize, found: usize) -> Result<(), ChannelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ChannelError::DimensionMismatch {
            at: at.to_string(),
            expected,
            found,
        })
    }
}

fn max_violation(pm: &[Vec<f64>], kernel: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (row, trow) in pm.iter().zip(target) {
        for (y2, &t) in trow.iter().enumerate() {
            let v: f64 = row.iter().zip(kernel).map(|(p, k)| p * k[y2]).sum();
            worst = worst.max((v - t).abs());
        }
    }
    worst
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}
