//! Auxiliary input distributions and the mutual-information bundles they induce.

use serde::{Deserialize, Serialize};

use super::RegionError;
use crate::channel::GmacChannel;
use crate::info::FiniteDist;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-stochastic matrix `p(col | row)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, RegionError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(RegionError::Dimension(format!(
                "kernel {rows}x{cols} with {} entries",
                data.len()
            )));
        }
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            if row.iter().any(|&v| !(v >= -STOCHASTIC_TOL)) {
                return Err(RegionError::Dimension(format!("kernel row {r} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(RegionError::Dimension(format!("kernel row {r} sums to {s}")));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        (0..n).for_each(|i| data[i * n + i] = 1.0);
        Self { rows: n, cols: n, data }
    }

    /// A single-row kernel, i.e. a plain pmf.
    pub fn pmf(p: Vec<f64>) -> Result<Self, RegionError> {
        let n = p.len();
        Self::new(1, n, p)
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Inputs for the one-confidential-message theorems:
/// `p(q, x2) p(u | q) p(x1 | u)`, optionally with the extra `p(v | q)` of the
/// outer bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneMessageDist {
    /// Joint pmf of `(q, x2)`, one row of length `|Q| |X2|`.
    pub q_x2: Kernel,
    pub q_card: usize,
    pub u_given_q: Kernel,
    pub x1_given_u: Kernel,
    pub v_given_q: Option<Kernel>,
}

impl OneMessageDist {
    pub fn new(
        q_card: usize,
        q_x2: Kernel,
        u_given_q: Kernel,
        x1_given_u: Kernel,
        v_given_q: Option<Kernel>,
    ) -> Result<Self, RegionError> {
        if q_x2.rows != 1 || q_card == 0 || q_x2.cols % q_card != 0 {
            return Err(RegionError::Dimension("p(q, x2) must be a single pmf over Q x X2".into()));
        }
        if u_given_q.rows != q_card || x1_given_u.rows != u_given_q.cols {
            return Err(RegionError::Dimension("p(u|q) / p(x1|u) shapes disagree".into()));
        }
        if let Some(v) = &v_given_q {
            if v.rows != q_card {
                return Err(RegionError::Dimension("p(v|q) rows must equal |Q|".into()));
            }
        }
        Ok(Self {
            q_x2,
            q_card,
            u_given_q,
            x1_given_u,
            v_given_q,
        })
    }

    pub fn x2_card(&self) -> usize {
        self.q_x2.cols / self.q_card
    }

    pub fn u_card(&self) -> usize {
        self.u_given_q.cols
    }

    pub fn x1_card(&self) -> usize {
        self.x1_given_u.cols
    }

    /// `U = X1`: the class `p(q, x2) p(x1 | q)` used for degraded channels.
    pub fn degraded(q_card: usize, q_x2: Kernel, x1_given_q: Kernel) -> Result<Self, RegionError> {
        let n = x1_given_q.cols;
        Self::new(q_card, q_x2, x1_given_q, Kernel::identity(n), None)
    }

    /// Superposition input on the binary channels: `Q` uniform, `X2 = 1`,
    /// `X1 = Q xor X'` with `Pr(X' = 1) = alpha`, and `U = X1`.
    pub fn binary_superposition(alpha: f64) -> Result<Self, RegionError> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(RegionError::Precondition(format!("alpha = {alpha} outside [0, 1/2]")));
        }
        let q_x2 = Kernel::pmf(vec![0.0, 0.5, 0.0, 0.5])?;
        let x1_given_q = Kernel::new(2, 2, vec![1.0 - alpha, alpha, alpha, 1.0 - alpha])?;
        Self::degraded(2, q_x2, x1_given_q)
    }

    /// Same distribution with `V = Q` attached (collapses the outer bound's extra auxiliary).
    pub fn with_v_equal_q(mut self) -> Self {
        self.v_given_q = Some(Kernel::identity(self.q_card));
        self
    }

    fn check_channel(&self, ch: &GmacChannel) -> Result<(), RegionError> {
        let a = ch.alphabets();
        if a.x1 != self.x1_card() || a.x2 != self.x2_card() {
            return Err(RegionError::Dimension(format!(
                "distribution inputs {}x{} vs channel {}x{}",
                self.x1_card(),
                self.x2_card(),
                a.x1,
                a.x2
            )));
        }
        Ok(())
    }

    /// Joint over `(Q, U, X1, X2, Y, Y2)`, or `(Q, V, U, X1, X2, Y, Y2)` when `V` is attached.
    pub fn joint(&self, ch: &GmacChannel) -> Result<FiniteDist, RegionError> {
        self.check_channel(ch)?;
        let a = ch.alphabets();
        let dest_eaves = dest_eaves(ch);
        let (nq, nu, nx1, nx2) = (self.q_card, self.u_card(), self.x1_card(), self.x2_card());
        let nv = self.v_given_q.as_ref().map_or(1, |v| v.cols);
        let mut mass = Vec::with_capacity(nq * nv * nu * nx1 * nx2 * a.y * a.y2);
        for q in 0..nq {
            for v in 0..nv {
                let pv = self.v_given_q.as_ref().map_or(1.0, |k| k.at(q, v));
                for u in 0..nu {
                    for x1 in 0..nx1 {
                        for x2 in 0..nx2 {
                            let w = self.q_x2.at(0, q * nx2 + x2) * pv * self.u_given_q.at(q, u) * self.x1_given_u.at(u, x1);
                            let col = &dest_eaves[(x1 * nx2 + x2) * a.y * a.y2..(x1 * nx2 + x2 + 1) * a.y * a.y2];
                            mass.extend(col.iter().map(|p| w * p));
                        }
                    }
                }
            }
        }
        let shape = if self.v_given_q.is_some() {
            vec![nq, nv, nu, nx1, nx2, a.y, a.y2]
        } else {
            vec![nq, nu, nx1, nx2, a.y, a.y2]
        };
        Ok(FiniteDist::new(shape, mass)?)
    }
}

/// Inputs for the two-confidential-message theorems:
/// `p(q) p(u | q) p(x1 | u) p(v | q) p(x2 | v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoMessageDist {
    pub q: Kernel,
    pub u_given_q: Kernel,
    pub x1_given_u: Kernel,
    pub v_given_q: Kernel,
    pub x2_given_v: Kernel,
}

impl TwoMessageDist {
    pub fn new(
        q: Kernel,
        u_given_q: Kernel,
        x1_given_u: Kernel,
        v_given_q: Kernel,
        x2_given_v: Kernel,
    ) -> Result<Self, RegionError> {
        if q.rows != 1
            || u_given_q.rows != q.cols
            || v_given_q.rows != q.cols
            || x1_given_u.rows != u_given_q.cols
            || x2_given_v.rows != v_given_q.cols
        {
            return Err(RegionError::Dimension("two-message kernel shapes disagree".into()));
        }
        Ok(Self {
            q,
            u_given_q,
            x1_given_u,
            v_given_q,
            x2_given_v,
        })
    }

    /// `U = X1`, `V = X2` with `p(q) p(x1 | q) p(x2 | q)`: the unprefixed class.
    pub fn direct(q: Kernel, x1_given_q: Kernel, x2_given_q: Kernel) -> Result<Self, RegionError> {
        let (n1, n2) = (x1_given_q.cols, x2_given_q.cols);
        Self::new(q, x1_given_q, Kernel::identity(n1), x2_given_q, Kernel::identity(n2))
    }

    /// Embeds a one-message distribution with `V := X2`.
    pub fn from_one_message(d: &OneMessageDist) -> Result<Self, RegionError> {
        let (nq, nx2) = (d.q_card, d.x2_card());
        let pq: Vec<f64> = (0..nq).map(|q| (0..nx2).map(|x2| d.q_x2.at(0, q * nx2 + x2)).sum()).collect();
        let mut x2_given_q = Vec::with_capacity(nq * nx2);
        for (q, &mass) in pq.iter().enumerate() {
            for x2 in 0..nx2 {
                x2_given_q.push(if mass > 0.0 {
                    d.q_x2.at(0, q * nx2 + x2) / mass
                } else {
                    1.0 / nx2 as f64
                });
            }
        }
        Self::new(
            Kernel::pmf(pq)?,
            d.u_given_q.clone(),
            d.x1_given_u.clone(),
            Kernel::new(nq, nx2, x2_given_q)?,
            Kernel::identity(nx2),
        )
    }

    pub fn q_card(&self) -> usize {
        self.q.cols
    }

    pub fn x1_card(&self) -> usize {
        self.x1_given_u.cols
    }

    pub fn x2_card(&self) -> usize {
        self.x2_given_v.cols
    }

    /// Joint over `(Q, U, X1, V, X2, Y, Y1, Y2)`.
    pub fn joint(&self, ch: &GmacChannel) -> Result<FiniteDist, RegionError> {
        let a = ch.alphabets();
        if a.x1 != self.x1_card() || a.x2 != self.x2_card() {
            return Err(RegionError::Dimension("two-message distribution does not match channel inputs".into()));
        }
        let (nq, nu, nv) = (self.q_card(), self.u_given_q.cols, self.v_given_q.cols);
        let (nx1, nx2) = (a.x1, a.x2);
        let out = a.y * a.y1 * a.y2;
        let mut mass = Vec::with_capacity(nq * nu * nx1 * nv * nx2 * out);
        for q in 0..nq {
            for u in 0..nu {
                for x1 in 0..nx1 {
                    let wu = self.q.at(0, q) * self.u_given_q.at(q, u) * self.x1_given_u.at(u, x1);
                    for v in 0..nv {
                        for x2 in 0..nx2 {
                            let w = wu * self.v_given_q.at(q, v) * self.x2_given_v.at(v, x2);
                            mass.extend(ch.slice(x1, x2).iter().map(|p| w * p));
                        }
                    }
                }
            }
        }
        Ok(FiniteDist::new(vec![nq, nu, nx1, nv, nx2, a.y, a.y1, a.y2], mass)?)
    }
}

// p(y, y2 | x1, x2) flattened as [x1][x2][y][y2].
fn dest_eaves(ch: &GmacChannel) -> Vec<f64> {
    let a = ch.alphabets();
    let mut out = vec![0.0; a.x1 * a.x2 * a.y * a.y2];
    for x1 in 0..a.x1 {
        for x2 in 0..a.x2 {
            let s = ch.slice(x1, x2);
            for y in 0..a.y {
                for y1 in 0..a.y1 {
                    for y2 in 0..a.y2 {
                        out[((x1 * a.x2 + x2) * a.y + y) * a.y2 + y2] += s[(y * a.y1 + y1) * a.y2 + y2];
                    }
                }
            }
        }
    }
    out
}

/// Mutual-information terms of the one-message bounds (bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneMessageMi {
    /// `I(U; Y | X2, Q)`
    pub u_y: f64,
    /// `I(U; Y2 | X2, Q)`
    pub u_y2: f64,
    /// `I(U, X2, Q; Y)`
    pub sum: f64,
    /// `I(U; Y | X2, V)`, present when the distribution carries `V`.
    pub u_y_given_v: Option<f64>,
}

/// Mutual-information terms of the two-message bounds (bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoMessageMi {
    /// `I(U; Y | V, Q)`
    pub u_y: f64,
    /// `I(V; Y | U, Q)`
    pub v_y: f64,
    /// `I(U, V; Y | Q)`
    pub uv_y: f64,
    /// `I(U, V, Q; Y)`
    pub uvq_y: f64,
    /// `I(U; Y2 | X2, V, Q)`: leakage of user 1 to user 2.
    pub leak1: f64,
    /// `I(V; Y1 | X1, U, Q)`: leakage of user 2 to user 1.
    pub leak2: f64,
    /// `I(U; Y | Q)`
    pub u_y_marg: f64,
    /// `I(V; Y | Q)`
    pub v_y_marg: f64,
}

impl TwoMessageMi {
    /// Zero-leakage bundle from the MAC terms alone (no eavesdroppers).
    pub fn mac_only(u_y: f64, v_y: f64, uv_y: f64, uvq_y: f64) -> Self {
        Self {
            u_y,
            v_y,
            uv_y,
            uvq_y,
            leak1: 0.0,
            leak2: 0.0,
            u_y_marg: uv_y - v_y,
            v_y_marg: uv_y - u_y,
        }
    }
}

pub fn mi_bundle_one_message(ch: &GmacChannel, d: &OneMessageDist) -> Result<OneMessageMi, RegionError> {
    let joint = d.joint(ch)?;
    if d.v_given_q.is_some() {
        // (Q, V, U, X1, X2, Y, Y2)
        let (q, v, u, x2, y, y2) = (0, 1, 2, 4, 5, 6);
        Ok(OneMessageMi {
            u_y: joint.cond_mutual_info(&[u], &[y], &[x2, q])?,
            u_y2: joint.cond_mutual_info(&[u], &[y2], &[x2, q])?,
            sum: joint.cond_mutual_info(&[u, x2, q], &[y], &[])?,
            u_y_given_v: Some(joint.cond_mutual_info(&[u], &[y], &[x2, v])?),
        })
    } else {
        // (Q, U, X1, X2, Y, Y2)
        let (q, u, x2, y, y2) = (0, 1, 3, 4, 5);
        Ok(OneMessageMi {
            u_y: joint.cond_mutual_info(&[u], &[y], &[x2, q])?,
            u_y2: joint.cond_mutual_info(&[u], &[y2], &[x2, q])?,
            sum: joint.cond_mutual_info(&[u, x2, q], &[y], &[])?,
            u_y_given_v: None,
        })
    }
}

pub fn mi_bundle_two_message(ch: &GmacChannel, d: &TwoMessageDist) -> Result<TwoMessageMi, RegionError> {
    let joint = d.joint(ch)?;
    let (q, u, x1, v, x2, y, y1, y2) = (0, 1, 2, 3, 4, 5, 6, 7);
    Ok(TwoMessageMi {
        u_y: joint.cond_mutual_info(&[u], &[y], &[v, q])?,
        v_y: joint.cond_mutual_info(&[v], &[y], &[u, q])?,
        uv_y: joint.cond_mutual_info(&[u, v], &[y], &[q])?,
        uvq_y: joint.cond_mutual_info(&[u, v, q], &[y], &[])?,
        leak1: joint.cond_mutual_info(&[u], &[y2], &[x2, v, q])?,
        leak2: joint.cond_mutual_info(&[v], &[y1], &[x1, u, q])?,
        u_y_marg: joint.cond_mutual_info(&[u], &[y], &[q])?,
        v_y_marg: joint.cond_mutual_info(&[v], &[y], &[q])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Alphabets, Builtin};
    use crate::info::h2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Kernel {
        let mut data = Vec::new();
        for _ in 0..rows {
            let raw: Vec<f64> = (0..cols).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / s));
        }
        Kernel::new(rows, cols, data).unwrap()
    }

    #[test]
    fn superposition_input_terms() {
        for p in [0.05, 0.11, 0.3] {
            let ch = GmacChannel::builtin(Builtin::DegradedBinary { p }).unwrap();
            for alpha in [0.0, 0.1, 0.25, 0.5] {
                let mi = mi_bundle_one_message(&ch, &OneMessageDist::binary_superposition(alpha).unwrap()).unwrap();
                assert!((mi.u_y - h2(alpha)).abs() < 1e-12);
                assert!((mi.sum - 1.0).abs() < 1e-12);
                let pa = p * (1.0 - alpha) + (1.0 - p) * alpha;
                assert!((mi.u_y2 - (h2(pa) - h2(p))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_u_gives_zero() {
        let ch = GmacChannel::builtin(Builtin::MultiplierBias).unwrap();
        // U = Q: p(u|q) identity, so U carries nothing beyond Q.
        let d = OneMessageDist::new(
            2,
            Kernel::pmf(vec![0.1, 0.4, 0.3, 0.2]).unwrap(),
            Kernel::identity(2),
            Kernel::new(2, 2, vec![0.3, 0.7, 0.6, 0.4]).unwrap(),
            None,
        )
        .unwrap();
        let mi = mi_bundle_one_message(&ch, &d).unwrap();
        assert!(mi.u_y.abs() < 1e-12 && mi.u_y2.abs() < 1e-12);
    }

    // Brute-force route: assemble p(q,u,x1,x2,y,y2) with nested loops and evaluate
    // each conditional MI as sum p log p(a,b,c)p(c)/(p(a,c)p(b,c)) from hand-built marginals.
    #[test]
    fn one_message_bundle_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Alphabets { x1: 2, x2: 2, y: 2, y1: 1, y2: 2 };
        for _ in 0..25 {
            let ch = GmacChannel::random(a, &mut rng);
            let d = OneMessageDist::new(
                2,
                random_kernel(&mut rng, 1, 4),
                random_kernel(&mut rng, 2, 3),
                random_kernel(&mut rng, 3, 2),
                None,
            )
            .unwrap();
            let mi = mi_bundle_one_message(&ch, &d).unwrap();

            let mut p = [[[[[[0.0f64; 2]; 2]; 2]; 2]; 3]; 2];
            for q in 0..2 {
                for u in 0..3 {
                    for x1 in 0..2 {
                        for x2 in 0..2 {
                            for y in 0..2 {
                                for y2 in 0..2 {
                                    p[q][u][x1][x2][y][y2] = d.q_x2.at(0, q * 2 + x2)
                                        * d.u_given_q.at(q, u)
                                        * d.x1_given_u.at(u, x1)
                                        * ch.prob(x1, x2, y, 0, y2);
                                }
                            }
                        }
                    }
                }
            }
            // I(U; Y | X2, Q) and I(U; Y2 | X2, Q)
            let cmi = |eaves: bool| {
                let mut puo = [[[[0.0f64; 2]; 3]; 2]; 2]; // [q][x2][u][o]
                for q in 0..2 {
                    for u in 0..3 {
                        for x1 in 0..2 {
                            for x2 in 0..2 {
                                for y in 0..2 {
                                    for y2 in 0..2 {
                                        let o = if eaves { y2 } else { y };
                                        puo[q][x2][u][o] += p[q][u][x1][x2][y][y2];
                                    }
                                }
                            }
                        }
                    }
                }
                let mut total = 0.0;
                for q in 0..2 {
                    for x2 in 0..2 {
                        let pc: f64 = puo[q][x2].iter().flatten().sum();
                        for u in 0..3 {
                            let pu: f64 = puo[q][x2][u].iter().sum();
                            for o in 0..2 {
                                let po: f64 = (0..3).map(|uu| puo[q][x2][uu][o]).sum();
                                let pj = puo[q][x2][u][o];
                                if pj > 0.0 {
                                    total += pj * (pj * pc / (pu * po)).log2();
                                }
                            }
                        }
                    }
                }
                total
            };
            assert!((mi.u_y - cmi(false)).abs() < 1e-12);
            assert!((mi.u_y2 - cmi(true)).abs() < 1e-12);
            // I(U, X2, Q; Y)
            let mut pcy = [[[[0.0f64; 2]; 2]; 3]; 2];
            for q in 0..2 {
                for u in 0..3 {
                    for x1 in 0..2 {
                        for x2 in 0..2 {
                            for y in 0..2 {
                                for y2 in 0..2 {
                                    pcy[q][u][x2][y] += p[q][u][x1][x2][y][y2];
                                }
                            }
                        }
                    }
                }
            }
            let py: Vec<f64> = (0..2)
                .map(|y| (0..2).flat_map(|q| (0..3).flat_map(move |u| (0..2).map(move |x2| (q, u, x2)))).map(|(q, u, x2)| pcy[q][u][x2][y]).sum())
                .collect();
            let mut sum = 0.0;
            for q in 0..2 {
                for u in 0..3 {
                    for x2 in 0..2 {
                        let pc: f64 = pcy[q][u][x2].iter().sum();
                        for y in 0..2 {
                            let pj = pcy[q][u][x2][y];
                            if pj > 0.0 {
                                sum += pj * (pj / (pc * py[y])).log2();
                            }
                        }
                    }
                }
            }
            assert!((mi.sum - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn v_equal_q_matches_plain_conditioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = Alphabets { x1: 2, x2: 2, y: 3, y1: 1, y2: 2 };
        for _ in 0..10 {
            let ch = GmacChannel::random(a, &mut rng);
            let d = OneMessageDist::new(
                2,
                random_kernel(&mut rng, 1, 4),
                random_kernel(&mut rng, 2, 3),
                random_kernel(&mut rng, 3, 2),
                None,
            )
            .unwrap();
            let plain = mi_bundle_one_message(&ch, &d).unwrap();
            let with_v = mi_bundle_one_message(&ch, &d.with_v_equal_q()).unwrap();
            assert!((plain.u_y - with_v.u_y_given_v.unwrap()).abs() < 1e-12);
            assert!((plain.u_y - with_v.u_y).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(Kernel::new(2, 2, vec![1.0, 0.0]).is_err());
        assert!(Kernel::new(1, 2, vec![1.2, -0.2]).is_err());
        assert!(OneMessageDist::binary_superposition(0.7).is_err());
    }

    #[test]
    fn embedding_keeps_mac_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 };
        let ch = GmacChannel::random(a, &mut rng);
        let d = OneMessageDist::new(
            2,
            random_kernel(&mut rng, 1, 4),
            random_kernel(&mut rng, 2, 3),
            random_kernel(&mut rng, 3, 2),
            None,
        )
        .unwrap();
        let one = mi_bundle_one_message(&ch, &d).unwrap();
        let two = mi_bundle_two_message(&ch, &TwoMessageDist::from_one_message(&d).unwrap()).unwrap();
        assert!((one.u_y - two.u_y).abs() < 1e-12);
        assert!((one.u_y2 - two.leak1).abs() < 1e-12);
        assert!((one.sum - two.uvq_y).abs() < 1e-12);
    }
}
